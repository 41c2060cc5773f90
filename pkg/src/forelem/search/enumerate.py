"""Breadth-first enumeration of the transformation tree."""
from __future__ import annotations

import csv
import io
import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Optional

from ..concretize.lower import ConcreteVariant, ConcretizeError, concretize
from ..ir.kernels import KernelSpec, builtin_kernel
from ..ir.nodes import Forelem, Program, ReservoirDomain, bound_vars, get_at
from ..ir.printer import pretty_print
from ..transform.passes import PassError
from ..transform.pipeline import Pass, _call, loop_targets

DEFAULT_DEPTH = 8
DEFAULT_BLOCKS = (2, 4, 8)


@dataclass
class TreeNode:
    pipeline: str
    depth: int
    parent: Optional[int]
    variant: Optional[str] = None  # id of the variant this node concretizes to
    duplicate_of: Optional[str] = None  # variant id when the result was already known

    @property
    def executable(self) -> bool:
        return self.variant is not None or self.duplicate_of is not None

    @property
    def label(self) -> str:
        return self.pipeline if self.executable else f"tmp:{self.pipeline}"


@dataclass
class VariantTree:
    kernel: str
    depth: int
    block_sizes: tuple
    nodes: list = field(default_factory=list)
    variants: list = field(default_factory=list)  # distinct ConcreteVariants

    def variant(self, ident: str) -> ConcreteVariant:
        for v in self.variants:
            if v.id == ident or v.pipeline == ident:
                return v
        raise KeyError(ident)

    def shapes(self) -> set:
        return {v.storage.shape_key() for v in self.variants}

    def formats(self) -> dict:
        out = {}
        for v in self.variants:
            out[v.format] = out.get(v.format, 0) + 1
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variant_id", "format", "depth", "pipeline"])
        for v in self.variants:
            w.writerow([v.id, v.format, len(v.pipeline.split(",")) if v.pipeline else 0,
                        v.pipeline])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "kernel": self.kernel, "depth": self.depth, "block_sizes": list(self.block_sizes),
            "nodes": [{"label": n.label, "depth": n.depth, "parent": n.parent,
                       "variant": n.variant or n.duplicate_of} for n in self.nodes],
            "variants": [v.to_json() for v in self.variants],
        }

    def dump(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _loop_reservoir(prog: Program, path) -> Optional[tuple]:
    loop = get_at(prog.body, path)
    if isinstance(loop, Forelem) and isinstance(loop.domain, ReservoirDomain):
        return prog.reservoir(loop.domain.reservoir).schema
    return None


def moves(prog: Program, block_sizes=DEFAULT_BLOCKS) -> list:
    """Every (step, result) applicable to ``prog``.

    A step carries an explicit target only when its untargeted form would
    pick a different loop or storage, so the texts stay short.
    """
    out = []

    def attempt(options, make):
        first = True
        for label, where in options:
            step = make(None if first else label)
            try:
                res = _call(prog, step, where)
            except PassError:
                continue
            first = False
            out.append((step, res))

    loops = loop_targets(prog)
    stores = [(s.name, s.name) for s in prog.storages]
    schemas = {}
    for label, path in loops:
        schemas[label] = _loop_reservoir(prog, path)
    fields = sorted({f for s in schemas.values() if s for f in s})
    orth_args = [(f,) for f in fields] + list(itertools.permutations(fields, 2))
    for args in orth_args:
        attempt(loops, lambda t, a=args: Pass("orth", a, t))
    for f in fields:
        attempt(loops, lambda t, f=f: Pass("undo", (f,), t))
    for name in ("encap", "matind", "matdep", "collapse", "interchange"):
        attempt(loops, lambda t, n=name: Pass(n, (), t))
    for x in block_sizes:
        attempt(loops, lambda t, x=x: Pass("block", (str(x),), t))
    for r in prog.reservoirs:
        if r.source is None:
            attempt([(r.name, r.name)], lambda t, r=r.name: Pass("hreduce", (r,), None))
    for name in ("split", "nsort", "dimreduce"):
        attempt(stores, lambda t, n=name: Pass(n, (), t))
    for mode in ("padded", "compact"):
        attempt(stores, lambda t, m=mode: Pass("nstar", (m,), t))
    return out


_WORD = re.compile(r"\b[A-Za-z_]\w*\b")


def canonical_text(prog: Program) -> str:
    """Printed program and storage plans with loop variables renamed in
    order of first appearance, so alpha-equivalent programs compare equal."""
    names = set(bound_vars(prog.body))
    extra = []
    for st in prog.storages:
        for l in st.levels:
            names.add(l.var)
            if l.block:
                names.add(l.block[0])
        if st.position_major is not None:
            i, dom, p = st.position_major
            names.update((i, p))
            extra.append(f"{st.name} position-major from {i} over {dom!r} via {p}")
    text = "\n".join([pretty_print(prog)] + [st.describe() for st in prog.storages] + extra)
    renamed = {}

    def sub(m):
        w = m.group(0)
        if w not in names:
            return w
        if w not in renamed:
            renamed[w] = f"v{len(renamed)}"
        return renamed[w]
    return _WORD.sub(sub, text)


def _state_key(prog: Program) -> str:
    return canonical_text(prog)


def _variant_key(v: ConcreteVariant) -> tuple:
    return canonical_text(v.program), v.storage.shape_key()


def enumerate_variants(kernel, depth: int = DEFAULT_DEPTH,
                       block_sizes=DEFAULT_BLOCKS, limit: Optional[int] = None) -> VariantTree:
    """Closure of the root under all applicable passes, up to ``depth`` steps.

    Programs reached along different paths are expanded once; variants are
    kept once per (lowered program, storage shape).
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    spec = kernel if isinstance(kernel, KernelSpec) else builtin_kernel(kernel)
    tree = VariantTree(spec.name, depth, tuple(sorted(block_sizes)))
    seen = {_state_key(spec.program)}
    known = {}
    tree.nodes.append(TreeNode("", 0, None))
    _classify(tree, 0, spec.program, spec.name, known)
    frontier = [(0, spec.program, ())]
    for d in range(1, depth + 1):
        nxt = []
        for parent, prog, steps in frontier:
            for step, res in moves(prog, tree.block_sizes):
                key = _state_key(res)
                if key in seen:
                    continue
                seen.add(key)
                path = steps + (str(step),)
                tree.nodes.append(TreeNode(",".join(path), d, parent))
                _classify(tree, len(tree.nodes) - 1, res, spec.name, known)
                nxt.append((len(tree.nodes) - 1, res, path))
                if limit and len(tree.variants) >= limit:
                    return tree
        frontier = nxt
    return tree


def _classify(tree, idx, prog, kernel, known):
    node = tree.nodes[idx]
    try:
        v = concretize(prog, node.pipeline, kernel)
    except ConcretizeError:
        return
    key = _variant_key(v)
    if key in known:
        node.duplicate_of = known[key]
        return
    known[key] = v.id
    node.variant = v.id
    tree.variants.append(v)
