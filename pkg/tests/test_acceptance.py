"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline;
they are also written to the terminal summary at the end of any run.
"""
import io
import time

import numpy as np
import pytest

import oracles
from conftest import CHAINS, m3, make_variant, random_matrix
from forelem.concretize import recognize_format
from forelem.execute.oracle import max_rel_err
from forelem.execute.runner import bind_variant, evaluate, run_program
from forelem.ingest import read_matrix_market, write_matrix_market
from forelem.ingest.mmio import MatrixMarketError
from forelem.ingest.synth import synth_matrix
from forelem.ir.kernels import builtin_kernel
from forelem.search import (
    TimingTable, bench, coverage, coverage_curve, curve_csv, enumerate_variants,
    rows_csv, select_kernel, timing_table,
)
from forelem.search.bench import COLUMNS, kernel_inputs, kernel_matrix, oracle_for
from forelem.search.enumerate import canonical_text, moves
from forelem.transform import apply_pass, parse_pipeline
from forelem.execute.operands import SparseOperand

DATA = __import__("pathlib").Path(__file__).parent / "data"
LINES = []


def report(n, ok, detail, seconds=None):
    took = "" if seconds is None else f" [{seconds:.2f}s]"
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}{took}"
    LINES.append(line)
    print(line)
    assert ok, line


# 1 ------------------------------------------------------------------------
def test_criterion_1_format_goldens():
    t0 = time.perf_counter()
    M3 = m3()
    e = M3.entries()
    comps, formats = {}, {}
    for fmt, text in CHAINS.items():
        v = make_variant("spmv", text)
        formats[fmt] = (v.format, recognize_format(v.storage))
        comps[fmt] = bind_variant(v, M3).physical.components
    seconds = time.perf_counter() - t0

    rows, cols, vals = oracles.coo(e)
    csr_v, csr_c, csr_p = oracles.csr(e, 3)
    ccs_v, ccs_r, ccs_p = oracles.ccs(e, 3)
    width, ell_v, ell_c = oracles.ellpack(e, 3)
    perm, jds_v, jds_c, jds_p = oracles.jds(e, 3)
    checks = [
        comps["COO"]["PA_row"] == rows, comps["COO"]["PA_col"] == cols,
        comps["COO"]["PA_A"] == vals,
        comps["CSR"]["PA_A"] == csr_v == [4, 1, 5, 2, 3],
        comps["CSR"]["PA_col"] == csr_c == [0, 2, 1, 0, 2],
        comps["CSR"]["PA_ptr"] == csr_p == [0, 2, 3, 5],
        comps["CCS"]["PA_A"] == ccs_v, comps["CCS"]["PA_row"] == ccs_r,
        comps["CCS"]["PA_ptr"] == ccs_p,
        comps["ELLPACK_ITPACK"]["PA_len"] == width == 2,
        comps["ELLPACK_ITPACK"]["PA_A"] == ell_v, comps["ELLPACK_ITPACK"]["PA_col"] == ell_c,
        ell_v.count(0.0) == 1,
        comps["JDS"]["PA_perm"] == perm == [0, 2, 1],
        comps["JDS"]["PA_A"] == jds_v == [4, 2, 5, 1, 3],
        comps["JDS"]["PA_col"] == jds_c,
        comps["JDS"]["PA_ptr"] == jds_p == [0, 3, 5],
    ]
    names_ok = all(f == a == b for f, (a, b) in formats.items())
    ok = all(checks) and names_ok and seconds < 1.0
    report(1, ok, f"{sum(checks)}/{len(checks)} component checks, formats "
           f"{[v[0] for v in formats.values()]}", seconds)


# 2 ------------------------------------------------------------------------
SEEDS_2 = 200


def _states(kernel):
    """Root plus every intermediate program of the format chains."""
    spec = builtin_kernel(kernel)
    chains = list(CHAINS.values()) + [
        "orth(row),encap,block(2),matdep,split,nstar(compact),dimreduce",
        "orth(row,col),encap,encap,matdep,split",
        "orth(col),encap,interchange,matdep",
        "hreduce(T),matind",
    ]
    states = {canonical_text(spec.program): spec.program}
    for text in chains:
        prog = spec.program
        for step in parse_pipeline(text).passes:
            try:
                prog = apply_pass(prog, step)
            except ValueError:
                break
            states.setdefault(canonical_text(prog), prog)
    return list(states.values())


def _single_pass_programs(kernel):
    out = []
    for prog in _states(kernel):
        out.append(("", prog))
        out.extend((str(step), res) for step, res in moves(prog, (2, 4)))
    return out


def _matrix_for(kernel, rng):
    if kernel != "trsv":
        return random_matrix(rng)
    a = random_matrix(rng, square=True)
    n = a.n_rows
    keep = a.cols > a.rows
    vals = np.concatenate([a.values[keep], rng.integers(1, 5, size=n).astype(float)])
    return SparseOperand(n, n, np.concatenate([a.rows[keep], np.arange(n)]),
                         np.concatenate([a.cols[keep], np.arange(n)]), vals)


def test_criterion_2_semantic_preservation():
    t0 = time.perf_counter()
    kernels = {"spmv": 1e-10, "spmm3": 1e-10, "trsv": 1e-8}
    programs = {k: _single_pass_programs(k) for k in kernels}
    rng = np.random.default_rng(2024)
    worst, failures, runs = 0.0, [], 0
    for _ in range(SEEDS_2):
        for kernel, tol in kernels.items():
            spec = builtin_kernel(kernel)
            matrix = _matrix_for(kernel, rng)
            inputs = kernel_inputs(kernel, matrix, int(rng.integers(1 << 30)))
            base = run_program(spec, spec.program, matrix, inputs)
            for label, prog in programs[kernel]:
                got = run_program(spec, prog, matrix, inputs)
                err = max_rel_err(got, base)
                runs += 1
                worst = max(worst, err)
                if err > tol:
                    failures.append((kernel, label, err))
    seconds = time.perf_counter() - t0
    npass = sum(len(v) for v in programs.values())
    ok = not failures and seconds < 60
    report(2, ok, f"{SEEDS_2} matrices x {npass} single-pass programs, {runs} runs, "
           f"worst rel err {worst:.2e}, {len(failures)} over tolerance", seconds)


# 3 ------------------------------------------------------------------------
def _oracle_matrices(count=10, seed=33):
    rng = np.random.default_rng(seed)
    out = []
    kinds = ("uniform", "banded", "skewed-rows")
    for i in range(count):
        n = int(rng.integers(8, 65))
        kind = kinds[i % 3]
        nnz = min(2 * n, 3 * n - 2) if kind == "banded" else int(rng.integers(n, 3 * n + 1))
        out.append(synth_matrix(n, nnz, kind, seed + i, width=1))
    return out


def test_criterion_3_oracle_equivalence():
    t0 = time.perf_counter()
    tol = {"spmv": 1e-10, "spmm3": 1e-10, "trsv": 1e-8}
    trees = {k: enumerate_variants(k, 8, (2, 4)) for k in tol}
    matrices = _oracle_matrices()
    worst, bad, checked = 0.0, [], 0
    for raw in matrices:
        for kernel, tree in trees.items():
            matrix = kernel_matrix(kernel, raw)
            inputs = kernel_inputs(kernel, matrix, 5)
            ref = oracle_for(kernel, matrix, inputs)
            for v in tree.variants:
                err = max_rel_err(evaluate(v, matrix, *inputs), ref)
                checked += 1
                worst = max(worst, err)
                if err > tol[kernel]:
                    bad.append((kernel, v.pipeline, err))
    seconds = time.perf_counter() - t0
    counts = {k: len(t.variants) for k, t in trees.items()}
    ok = not bad and seconds < 300
    report(3, ok, f"{counts} variants x {len(matrices)} matrices (n <= "
           f"{max(m.n_rows for m in matrices)}), {checked} checks, worst {worst:.2e}, "
           f"{len(bad)} mismatches", seconds)


# 4 ------------------------------------------------------------------------
def test_criterion_4_enumeration_richness():
    t0 = time.perf_counter()
    tree = enumerate_variants("spmv", 8, (2, 4))
    seconds = time.perf_counter() - t0
    formats = tree.formats()
    named = {"COO", "CSR", "CCS", "ELLPACK_ITPACK", "JDS"}
    ok = len(tree.variants) >= 25 and len(tree.shapes()) >= 10 and named <= set(formats)
    report(4, ok, f"{len(tree.variants)} variants, {len(tree.shapes())} shapes, "
           f"formats {dict(sorted(formats.items()))}", seconds)


# 5 ------------------------------------------------------------------------
T_GRID = (0, 0.5, 1, 2, 5, 10, 20, 30, 50, 100, 1000)


def _random_table(rng):
    nr, nm = int(rng.integers(1, 9)), int(rng.integers(1, 9))
    routines = [f"r{i}" for i in range(nr)]
    matrices = [f"m{j}" for j in range(nm)]
    # coarse values so exact ties and threshold hits occur
    vals = rng.integers(10, 30, size=(nr, nm)) / 10.0
    return TimingTable.from_matrix(routines, matrices, vals), routines, matrices


def test_criterion_5_coverage_math():
    t0 = time.perf_counter()
    rng = np.random.default_rng(55)
    mismatches = monotone_fail = scale_fail = 0
    for _ in range(50):
        table, R, M = _random_table(rng)
        prev_top, prev_cov = None, 0
        for t in T_GRID:
            rep = coverage(table, t)
            top, weight, cov, argmax = oracles.brute_coverage(table.times, R, M, t)
            if (dict(rep.top) != {m: frozenset(s) for m, s in top.items()} or
                    rep.weights != weight or rep.coverage != cov or set(rep.argmax) != argmax
                    or any(rep.best[m] not in rep.top[m] for m in M)):
                mismatches += 1
            if prev_top is not None and (rep.coverage < prev_cov or
                                         any(not prev_top[m] <= rep.top[m] for m in M)):
                monotone_fail += 1
            prev_top, prev_cov = rep.top, rep.coverage
            m = M[int(rng.integers(len(M)))]
            c = float(rng.uniform(0.01, 100.0))
            srep = coverage(table.scaled(m, c), t)
            if srep.top != rep.top or srep.weights != rep.weights or \
                    srep.coverage != rep.coverage:
                scale_fail += 1
    seconds = time.perf_counter() - t0
    ok = not (mismatches or monotone_fail or scale_fail) and seconds < 5
    report(5, ok, f"50 tables x {len(T_GRID)} t values: {mismatches} brute-force mismatches, "
           f"{monotone_fail} monotonicity and {scale_fail} scale failures", seconds)


# 6 ------------------------------------------------------------------------
def _selection_table(rng, n_routines=6, n_matrices=12):
    """r* within 1.5% of the best everywhere; every rival is best on at most
    three matrices and at least 10% slower elsewhere."""
    R = ["r_star"] + [f"r{i}" for i in range(1, n_routines)]
    M = [f"m{j}" for j in range(n_matrices)]
    times = {}
    for j, m in enumerate(M):
        best = float(rng.uniform(1.0, 5.0))
        winner = R[1 + (j // 3) % (n_routines - 1)] if j % 2 else "r_star"
        for r in R:
            if r == winner:
                times[(r, m)] = best
            elif r == "r_star":
                times[(r, m)] = best * (1 + float(rng.uniform(0.001, 0.015)))
            else:
                times[(r, m)] = best * (1 + float(rng.uniform(0.10, 0.60)))
    return TimingTable(times)


def test_criterion_6_selection_demo():
    rng = np.random.default_rng(66)
    table = _selection_table(rng)
    want = oracles.all_within(table.times, table.routines, table.matrices, 2.0)
    results = [select_kernel(table, k=4, t_percent=2.0, seed=s).routines for s in range(20)]
    ok = want == {"r_star"} and all(r == ("r_star",) for r in results)
    report(6, ok, f"k=4 t=2%: selections over 20 seeds {sorted(set(results))}")


# 7 ------------------------------------------------------------------------
def test_criterion_7_bench_csv_and_curve():
    t0 = time.perf_counter()
    variants = enumerate_variants("spmv", 8, (2, 4)).variants
    matrices = {f"syn{i}": synth_matrix(16, 40, ("uniform", "banded", "skewed-rows")[i], i)
                for i in range(3)}
    rows = bench("spmv", matrices, variants, repeats=3, seed=0)
    text = rows_csv(rows)
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    body = [ln.split(",") for ln in lines[1:]]
    keys = {(r[0], r[2]) for r in body}
    grid = {(m, v.id) for m in matrices for v in variants}
    positive = all(float(r[5]) > 0 and float(r[6]) > 0 for r in body)
    exact = all(float(r[7]) <= 1e-10 for r in body)
    again = rows_csv(bench("spmv", matrices, variants[:5], repeats=1, seed=0)).split("\n")
    expect = [[m, "spmv", v.id, v.format, "1"] for m in matrices for v in variants[:5]]
    stable = again[0] == lines[0] and [ln.split(",")[:5] for ln in again[1:-1]] == expect
    curve = coverage_curve(timing_table(rows), T_GRID)
    covs = [c for _, c, _ in curve]
    monotone = all(a <= b for a, b in zip(covs, covs[1:]))
    csv_ok = curve_csv(curve).startswith("t_percent,coverage,argmax_routines\n")
    seconds = time.perf_counter() - t0
    ok = (tuple(header) == COLUMNS and len(body) == len(grid) and keys == grid and positive
          and exact and stable and monotone and csv_ok)
    report(7, ok, f"{len(body)} rows over {len(variants)} variants x {len(matrices)} matrices, "
           f"schema {'ok' if tuple(header) == COLUMNS else 'BAD'}, coverage curve {covs}",
           seconds)


# 8 ------------------------------------------------------------------------
def _roundtrip(matrix, **kw):
    buf = io.StringIO()
    write_matrix_market(matrix, buf, **kw)
    buf.seek(0)
    return read_matrix_market(buf), buf.getvalue()


def test_criterion_8_matrix_market():
    t0 = time.perf_counter()
    general = read_matrix_market(DATA / "m3.mtx")
    sym = read_matrix_market(DATA / "sym.mtx")
    pat = read_matrix_market(DATA / "pattern.mtx")
    checks = {
        "general read": general.entries() == m3().entries(),
        "symmetric expand": sym.entries() == sorted(
            [(0, 0, 2.5), (1, 0, -1.0), (0, 1, -1.0), (2, 2, 7.0), (3, 1, 0.125),
             (1, 3, 0.125), (3, 3, 1e-3)]),
        "pattern ones": pat.entries() == [(0, 1, 1.0), (1, 3, 1.0), (2, 0, 1.0), (2, 2, 1.0)],
    }
    for name, matrix, kw in (("general", general, {}),
                             ("symmetric", sym, {"symmetry": "symmetric"}),
                             ("pattern", pat, {"field": "pattern"})):
        back, text = _roundtrip(matrix, **kw)
        again, text2 = _roundtrip(back, **kw)
        checks[f"{name} round trip"] = (back.entries() == matrix.entries() and
                                        back.shape == matrix.shape and text == text2)
    rng = np.random.default_rng(8)
    vals = rng.standard_normal(30)
    flat = rng.choice(100, 30, replace=False)
    odd = SparseOperand(10, 10, flat // 10, flat % 10, vals)
    checks["float bits"] = _roundtrip(odd)[0].entries() == odd.entries()
    try:
        read_matrix_market(DATA / "dup.mtx")
        checks["duplicate error"] = False
    except MatrixMarketError as exc:
        checks["duplicate error"] = exc.line == 5
    summed = read_matrix_market(DATA / "dup.mtx", sum_duplicates=True)
    checks["sum duplicates"] = summed.entries() == [(0, 0, 2.0), (1, 1, 2.0)]
    seconds = time.perf_counter() - t0
    ok = all(checks.values()) and seconds < 1.0
    failed = [k for k, v in checks.items() if not v]
    report(8, ok, f"{sum(checks.values())}/{len(checks)} checks"
           + (f", failed {failed}" if failed else ""), seconds)


@pytest.fixture(scope="module", autouse=True)
def _summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and LINES:
        reporter.write_sep("=", "acceptance criteria")
        for line in sorted(LINES):
            reporter.write_line(line)
