"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 bad input, 3 internal invariant
violation.  ``FORELEM_SEED`` replaces the default seed 0.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys

from .concretize.lower import ConcretizeError, concretize
from .execute.interpreter import ExecutionError
from .execute.operands import OperandError
from .execute.oracle import max_rel_err
from .execute.runner import bind_variant, run_variant
from .ingest.mmio import MatrixMarketError, read_matrix_market
from .ingest.synth import DISTRIBUTIONS, SynthError, synth_matrix, triangular_part
from .ir.analysis import ScopeError, validate
from .ir.kernels import builtin_kernel
from .ir.parser import DSLSyntaxError, parse_program
from .ir.printer import pretty_print
from .search.bench import (
    bench, kernel_inputs, load_matrices, oracle_for, rows_csv, synthetic_corpus,
)
from .search.coverage import (
    TimingError, TimingTable, coverage, coverage_curve, curve_csv, select_kernel,
)
from .search.enumerate import DEFAULT_BLOCKS, DEFAULT_DEPTH, enumerate_variants
from .transform.pipeline import PipelineError, PipelineSyntaxError, apply_pipeline
from .validation import InvariantError, check_physical

EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 1, 2, 3
_ID = re.compile(r"^[0-9a-f]{12}$")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def default_seed() -> int:
    raw = os.environ.get("FORELEM_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"FORELEM_SEED must be an integer, got {raw!r}") from None


def _ints(text: str) -> tuple:
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# --------------------------------------------------------------------------
# shared option groups

def _add_matrix_opts(p):
    p.add_argument("--matrix", help="Matrix Market file")
    p.add_argument("--sum-duplicates", action="store_true",
                   help="add repeated entries instead of rejecting them")
    p.add_argument("--synth", choices=DISTRIBUTIONS, help="generate a matrix instead")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--nnz", type=int, default=40)
    p.add_argument("--width", type=int, default=1, help="band width for banded")
    p.add_argument("--zipf", type=float, default=1.2, help="exponent for skewed-rows")
    p.add_argument("--tril", action="store_true", help="keep the lower triangle")
    p.add_argument("--triu", action="store_true", help="keep the upper triangle")
    p.add_argument("--unit-diag", action="store_true", help="set the diagonal to 1")


def _add_variant_opts(p):
    p.add_argument("--kernel", default="spmv", help="spmv, spmm<k>, trsv or trsv-lower")
    p.add_argument("--variant", help="variant id or pipeline text")
    p.add_argument("--passes", help="pipeline text (same as a textual --variant)")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH,
                   help="enumeration depth used to resolve a variant id")
    p.add_argument("--blocks", type=_ints, default=DEFAULT_BLOCKS,
                   help="block sizes used to resolve a variant id")


def _load_matrix(args, seed):
    if bool(args.matrix) == bool(args.synth):
        raise InputError("give exactly one of --matrix or --synth")
    if args.matrix:
        try:
            m = read_matrix_market(args.matrix, sum_duplicates=args.sum_duplicates)
        except OSError as exc:
            raise InputError(f"cannot read {args.matrix}: {exc.strerror}") from None
    else:
        m = synth_matrix(args.n, args.nnz, args.synth, seed, width=args.width, s=args.zipf)
    if args.tril and args.triu:
        raise InputError("--tril and --triu are exclusive")
    if args.unit_diag and not (args.tril or args.triu):
        raise InputError("--unit-diag goes with --tril or --triu")
    if args.tril or args.triu:
        m = triangular_part(m, lower=args.tril, unit_diag=args.unit_diag)
    return m


def _resolve_variant(args):
    text = args.passes if args.passes is not None else args.variant
    if text is None:
        raise InputError("give --variant or --passes")
    spec = builtin_kernel(args.kernel)
    if args.passes is None and _ID.match(text):
        tree = enumerate_variants(spec, args.depth, args.blocks)
        for v in tree.variants:
            if v.id == text:
                return v
        raise InputError(f"no variant {text} for {spec.name} at depth {args.depth} "
                         f"with blocks {list(args.blocks)}")
    prog, _ = apply_pipeline(spec.program, text)
    return concretize(prog, text, spec.name)


def _out(text: str, path=None):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# --------------------------------------------------------------------------
# subcommands

def cmd_parse(args, seed):
    try:
        with open(args.file, encoding="utf-8") as fh:
            src = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {args.file}: {exc.strerror}") from None
    prog = parse_program(src, args.file)
    validate(prog)
    if args.json:
        _out(json.dumps({"reservoirs": [[r.name, list(r.schema)] for r in prog.reservoirs],
                         "dense": [d.name for d in prog.dense],
                         "program": pretty_print(prog)}, indent=2))
    else:
        _out(pretty_print(prog))


def cmd_transform(args, seed):
    spec = builtin_kernel(args.kernel)
    prog, _ = apply_pipeline(spec.program, args.passes)
    try:
        v = concretize(prog, args.passes, spec.name)
    except ConcretizeError as exc:
        _out(pretty_print(prog))
        for st in prog.storages:
            _out(f"# storage {st.describe()}")
        _out(f"# not executable yet: {exc}")
        return
    _out(pretty_print(v.program))
    _out(v.describe())


def cmd_enumerate(args, seed):
    tree = enumerate_variants(args.kernel, args.depth, args.blocks)
    _out(tree.dump() if args.format == "json" else tree.to_csv(), args.out)
    print(f"{len(tree.nodes)} nodes, {len(tree.variants)} variants, "
          f"{len(tree.shapes())} storage shapes", file=sys.stderr)


def cmd_build(args, seed):
    v = _resolve_variant(args)
    m = _load_matrix(args, seed)
    bound = bind_variant(v, m)
    check_physical(bound.physical)
    out = v.to_json()
    out["instance"] = bound.physical.to_json()["components"]
    out["build_seconds"] = bound.build_seconds
    _out(json.dumps(out, indent=2))


def cmd_run(args, seed):
    v = _resolve_variant(args)
    m = _load_matrix(args, seed)
    inputs = kernel_inputs(v.kernel, m, seed)
    res = run_variant(v, m, *inputs, repeats=args.repeats)
    report = {"variant": v.id, "pipeline": v.pipeline, "format": v.format,
              "median_seconds": res.wall_time, "repeats": res.repeats,
              "checksum": res.checksum, "output": res.output.tolist()}
    err = None
    if args.check:
        err = max_rel_err(res.output, oracle_for(v.kernel, m, inputs))
        report["max_rel_err"] = err
    _out(json.dumps(report, indent=2))
    if err is not None:
        tol = 1e-8 if v.kernel.startswith("trsv") else 1e-10
        if err > tol:
            raise InvariantError(f"max_rel_err {err:.3g} exceeds {tol:g}")


def cmd_bench(args, seed):
    if args.matrices:
        if not os.path.isdir(args.matrices):
            raise InputError(f"{args.matrices} is not a directory")
        mats = load_matrices(args.matrices)
        if not mats:
            raise InputError(f"no .mtx files in {args.matrices}")
    else:
        mats = synthetic_corpus(args.synth_count, n=args.n, seed=seed)
    if args.passes:
        variants = [_resolve_variant(argparse.Namespace(
            passes=p, variant=None, kernel=args.kernel)) for p in args.passes.split(";")]
    else:
        variants = enumerate_variants(args.kernel, args.depth, args.blocks).variants
        if args.limit:
            variants = variants[:args.limit]
    rows = bench(args.kernel, mats, variants, args.repeats, seed)
    _out(rows_csv(rows), args.out)


def _table(path) -> TimingTable:
    try:
        return TimingTable.read_csv(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def cmd_coverage(args, seed):
    table = _table(args.timings)
    if args.curve:
        _out(curve_csv(coverage_curve(table, args.curve)), args.out)
    else:
        _out(coverage(table, args.t).to_csv(), args.out)


def cmd_select(args, seed):
    table = _table(args.timings)
    s = select_kernel(table, args.k, args.t, args.seed if args.seed is not None else seed)
    _out(f"sample: {','.join(s.sample)}")
    _out(f"selected: {s.message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="forelem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("parse", help="parse a DSL file and print it back")
    q.add_argument("file")
    q.add_argument("--json", action="store_true")
    q.set_defaults(fn=cmd_parse)

    q = sub.add_parser("transform", help="apply a pipeline and print the lowered result")
    q.add_argument("--kernel", default="spmv")
    q.add_argument("--passes", required=True)
    q.set_defaults(fn=cmd_transform)

    q = sub.add_parser("enumerate", help="enumerate the transformation tree")
    q.add_argument("--kernel", default="spmv")
    q.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    q.add_argument("--blocks", type=_ints, default=DEFAULT_BLOCKS)
    q.add_argument("--format", choices=("csv", "json"), default="csv")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_enumerate)

    q = sub.add_parser("build", help="build a variant's storage for a matrix")
    _add_variant_opts(q)
    _add_matrix_opts(q)
    q.set_defaults(fn=cmd_build)

    q = sub.add_parser("run", help="run a variant on a matrix")
    _add_variant_opts(q)
    _add_matrix_opts(q)
    q.add_argument("--repeats", type=int, default=10)
    q.add_argument("--check", action="store_true", help="compare with the dense oracle")
    q.set_defaults(fn=cmd_run)

    q = sub.add_parser("bench", help="time variants over a matrix corpus")
    q.add_argument("--kernel", default="spmv")
    q.add_argument("--matrices", help="directory of .mtx files")
    q.add_argument("--synth-count", type=int, default=4,
                   help="synthetic corpus size when --matrices is absent")
    q.add_argument("--n", type=int, default=32)
    q.add_argument("--repeats", type=int, default=10)
    q.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    q.add_argument("--blocks", type=_ints, default=DEFAULT_BLOCKS)
    q.add_argument("--passes", help="';'-separated pipelines instead of enumeration")
    q.add_argument("--limit", type=int, help="only the first N enumerated variants")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_bench)

    q = sub.add_parser("coverage", help="coverage report or curve from a timing table")
    q.add_argument("--timings", required=True)
    g = q.add_mutually_exclusive_group(required=True)
    g.add_argument("--t", type=float)
    g.add_argument("--curve", type=_floats)
    q.add_argument("--out")
    q.set_defaults(fn=cmd_coverage)

    q = sub.add_parser("select", help="k-matrix kernel selection")
    q.add_argument("--timings", required=True)
    q.add_argument("--k", type=int, default=4)
    q.add_argument("--t", type=float, default=2.0)
    q.add_argument("--seed", type=int)
    q.set_defaults(fn=cmd_select)
    return p


INPUT_ERRORS = (InputError, DSLSyntaxError, ScopeError, MatrixMarketError, SynthError,
                PipelineError, PipelineSyntaxError, ConcretizeError, OperandError,
                TimingError, ValueError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        seed = default_seed()
        args.fn(args, seed)
    except (InvariantError, AssertionError, ExecutionError) as exc:
        print(f"forelem: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except INPUT_ERRORS as exc:
        print(f"forelem: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
