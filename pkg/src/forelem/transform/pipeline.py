"""Pass pipelines: textual form, target resolution and application.

Textual form is a comma-separated list of ``name[(args)][@target]``, for
example ``orth(row),encap,matdep,split,nstar(compact),dimreduce``.  A loop
target names the loop variable, optionally with ``#n`` to pick the n-th loop
binding that name; a storage target names the storage.  Without a target
the first loop (or storage) in pre-order for which the pass applies is used.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from ..ir.analysis import ScopeError, validate
from ..ir.nodes import Program, iter_loops
from . import passes as P
from .passes import PassError


@dataclass(frozen=True)
class PassSpec:
    name: str
    kind: str  # loop | storage | reservoir
    fn: object
    nargs: tuple  # (min, max)


def _orth(prog, path, *fields):
    return P.orthogonalize(prog, path, fields)


def _interchange(prog, path, *args):
    if len(args) == 2:
        if args[0] != prog_loop_var(prog, path):
            raise PassError(f"outer loop is not {args[0]}")
        return P.loop_interchange(prog, path, args[1])
    return P.loop_interchange(prog, path, args[0] if args else None)


def _block(prog, path, size):
    try:
        x = int(size)
    except ValueError:
        raise PassError(f"block size {size!r} is not an integer") from None
    return P.loop_block(prog, path, x)


def prog_loop_var(prog, path):
    from ..ir.nodes import get_at
    return get_at(prog.body, path).var


PASSES = {
    "orth": PassSpec("orth", "loop", _orth, (1, 8)),
    "undo": PassSpec("undo", "loop", P.undo_orthogonalize, (1, 1)),
    "encap": PassSpec("encap", "loop", P.encapsulate, (0, 0)),
    "matind": PassSpec("matind", "loop", P.materialize_independent, (0, 0)),
    "matdep": PassSpec("matdep", "loop", P.materialize_dependent, (0, 0)),
    "hreduce": PassSpec("hreduce", "reservoir", P.horizontal_reduce, (0, 1)),
    "split": PassSpec("split", "storage", P.structure_split, (0, 0)),
    "nstar": PassSpec("nstar", "storage", P.nstar_materialize, (1, 1)),
    "nsort": PassSpec("nsort", "storage", P.nstar_sort, (0, 0)),
    "dimreduce": PassSpec("dimreduce", "storage", P.dim_reduce, (0, 0)),
    "collapse": PassSpec("collapse", "loop", P.loop_collapse, (0, 0)),
    "interchange": PassSpec("interchange", "loop", _interchange, (0, 2)),
    "block": PassSpec("block", "loop", _block, (1, 1)),
}

ALIASES = {
    "orthogonalize": "orth", "encapsulate": "encap", "materialize_independent": "matind",
    "materialize_dependent": "matdep", "horizontal_reduce": "hreduce",
    "structure_split": "split", "nstar_sort": "nsort", "dim_reduce": "dimreduce",
    "loop_collapse": "collapse", "loop_interchange": "interchange", "loop_block": "block",
}


class PipelineSyntaxError(ValueError):
    pass


class PipelineError(ValueError):
    """A pass in a pipeline did not apply."""

    def __init__(self, index: int, step: "Pass", reason: str):
        super().__init__(f"pass {index} ({step}) is not applicable: {reason}")
        self.index = index
        self.step = step
        self.reason = reason


@dataclass(frozen=True)
class Pass:
    name: str
    args: tuple = ()
    target: Optional[str] = None

    def __post_init__(self):
        spec = PASSES.get(self.name)
        if spec is None:
            raise PipelineSyntaxError(f"unknown pass {self.name!r}")
        lo, hi = spec.nargs
        if not lo <= len(self.args) <= hi:
            raise PipelineSyntaxError(
                f"pass {self.name} takes {lo}..{hi} arguments, got {len(self.args)}")

    def __str__(self) -> str:
        s = self.name
        if self.args:
            s += "(" + ",".join(str(a) for a in self.args) + ")"
        if self.target:
            s += "@" + self.target
        return s

    @property
    def spec(self) -> PassSpec:
        return PASSES[self.name]


@dataclass(frozen=True)
class Pipeline:
    passes: tuple = ()
    provenance: str = field(default="", compare=False)

    def __str__(self) -> str:
        return ",".join(str(p) for p in self.passes)

    def __len__(self) -> int:
        return len(self.passes)

    def __iter__(self):
        return iter(self.passes)

    def then(self, step: Pass) -> "Pipeline":
        return Pipeline(self.passes + (step,), self.provenance)

    @classmethod
    def parse(cls, text: str) -> "Pipeline":
        return parse_pipeline(text)


_STEP = re.compile(r"\s*([A-Za-z_]\w*)\s*(?:\(([^()]*)\))?\s*(?:@\s*([\w#]+))?\s*$")


def _split_top(text: str) -> list:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise PipelineSyntaxError(f"unbalanced parenthesis in {text!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise PipelineSyntaxError(f"unbalanced parenthesis in {text!r}")
    parts.append("".join(cur))
    return parts


def parse_pipeline(text: str) -> Pipeline:
    text = text.strip()
    if not text:
        return Pipeline()
    steps = []
    for part in _split_top(text):
        m = _STEP.match(part)
        if not m:
            raise PipelineSyntaxError(f"cannot parse pass {part.strip()!r}")
        name = ALIASES.get(m.group(1), m.group(1))
        args = tuple(a.strip() for a in m.group(2).split(",")) if m.group(2) else ()
        if any(not a for a in args):
            raise PipelineSyntaxError(f"empty argument in {part.strip()!r}")
        steps.append(Pass(name, args, m.group(3)))
    return Pipeline(tuple(steps), provenance=text)


# --------------------------------------------------------------------------
# targets

def loop_targets(prog: Program) -> list:
    """(label, path) for every loop; labels are unique ``var`` or ``var#n``."""
    seen, out = {}, []
    for path, loop in iter_loops(prog.body):
        n = seen.get(loop.var, 0) + 1
        seen[loop.var] = n
        out.append((loop.var if n == 1 else f"{loop.var}#{n}", path))
    return out


def _resolve_loop(prog: Program, target: str) -> tuple:
    labels = dict(loop_targets(prog))
    if target in labels:
        return labels[target]
    if target.endswith("#1") and target[:-2] in labels:
        return labels[target[:-2]]
    raise PassError(f"no loop {target!r}")


def candidates(prog: Program, step: Pass) -> list:
    """(label, thunk) pairs the pass could be applied to, in pre-order."""
    kind = step.spec.kind
    if kind == "loop":
        return [(label, path) for label, path in loop_targets(prog)]
    if kind == "storage":
        return [(s.name, s.name) for s in prog.storages]
    if step.args:
        return [(step.args[0], step.args[0])]
    return [(r.name, r.name) for r in prog.reservoirs]


def _call(prog: Program, step: Pass, where) -> Program:
    spec = step.spec
    args = step.args
    if spec.kind == "reservoir":
        args = ()
    try:
        out = spec.fn(prog, where, *args)
    except KeyError as exc:
        raise PassError(str(exc).strip("'\"")) from None
    try:
        validate(out)
    except ScopeError as exc:  # a pass produced an ill-scoped program
        raise AssertionError(f"{step} broke scoping: {exc}") from exc
    return out


def apply_pass(prog: Program, step: Pass) -> Program:
    """Apply one step, resolving a missing target to the first applicable one."""
    spec = step.spec
    if step.target is not None:
        if spec.kind == "loop":
            where = _resolve_loop(prog, step.target)
        else:
            where = step.target
            if spec.kind == "storage" and not any(s.name == where for s in prog.storages):
                raise PassError(f"no storage {where!r}")
            if spec.kind == "reservoir" and not prog.has_reservoir(where):
                raise PassError(f"no reservoir {where!r}")
        return _call(prog, step, where)
    reasons = []
    for label, where in candidates(prog, step):
        try:
            return _call(prog, step, where)
        except PassError as exc:
            reasons.append(f"{label}: {exc}")
    if not reasons:
        raise PassError(f"no {spec.kind} to apply it to")
    if len(reasons) == 1:
        raise PassError(reasons[0])
    raise PassError("no target applies (" + "; ".join(reasons) + ")")


def default_target(prog: Program, step: Pass) -> Optional[str]:
    """Label the untargeted form of ``step`` would resolve to, if any."""
    for label, where in candidates(prog, step):
        try:
            _call(prog, step, where)
            return label
        except PassError:
            continue
    return None


def apply_pipeline(root: Program, pipeline) -> tuple:
    """Left fold of the passes; returns (program, last created storage or None)."""
    if isinstance(pipeline, str):
        pipeline = parse_pipeline(pipeline)
    prog = root
    for n, step in enumerate(pipeline.passes):
        try:
            prog = apply_pass(prog, step)
        except PassError as exc:
            raise PipelineError(n, step, str(exc)) from None
    return prog, (prog.storages[-1] if prog.storages else None)


def validate_pipeline(root: Program, pipeline) -> Optional[PipelineError]:
    """Return None if every pass applies in turn, else the first failure."""
    try:
        apply_pipeline(root, pipeline)
    except PipelineError as exc:
        return exc
    return None
