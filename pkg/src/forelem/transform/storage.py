"""Materialized storage plans and their symbolic instances.

A plan records how a materialized loop groups the tuples it used to
iterate; an instance fills the plan from a concrete reservoir.  Both are
independent of any physical layout, which is decided at concretization.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Any, Mapping, Optional

from ..ir.nodes import BinOp, Condition, Const, Extent, Interval, Var
from ..ir.reservoir import ReservoirError, TupleReservoir


@dataclass(frozen=True)
class Level:
    """One nesting level: groups keyed by the loop variable ``var``.

    Every field in ``fields`` equals the key inside a group.  ``block`` is
    ``(block_var, size)`` when the level was blocked before materialization.
    """
    var: str
    fields: tuple
    extent: Any
    block: Optional[tuple] = None


@dataclass(frozen=True)
class RecordField:
    name: str
    kind: str  # field | data
    source: str
    side: Optional[str] = None  # tuple variable, for join storages


@dataclass(frozen=True)
class JoinSpec:
    left: str
    left_var: str
    right: str
    right_var: str
    left_field: str
    right_field: str


@dataclass(frozen=True)
class MaterializedStorage:
    name: str
    reservoir: str
    records: tuple
    levels: tuple = ()
    filters: Optional[Condition] = None
    join: Optional[JoinSpec] = None
    len_mode: Optional[str] = None  # None | padded | compact
    dim_reduced: bool = False
    split: bool = False
    perm: bool = False
    # (outer var, outer domain, inner var) saved when turned position-major
    position_major: Optional[tuple] = None

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def blocked(self) -> bool:
        return any(l.block for l in self.levels)

    @property
    def record_names(self) -> tuple:
        return tuple(r.name for r in self.records)

    def record(self, name: str) -> RecordField:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(f"storage {self.name} has no record field {name!r}")

    def evolve(self, **kw) -> "MaterializedStorage":
        return replace(self, **kw)

    def describe(self) -> str:
        from ..ir.printer import format_expr
        parts = [f"{self.name} of {self.reservoir}"]
        if self.join:
            parts.append(f"join {self.join.left}x{self.join.right}"
                         f".{self.join.right_field}[{self.join.left_field}]")
        lv = []
        for l in self.levels:
            s = f"{l.var}:{'='.join(l.fields)}<{format_expr(l.extent)}"
            if l.block:
                s += f"/{l.block[0]}*{l.block[1]}"
            lv.append(s)
        parts.append("levels(" + ", ".join(lv) + ")")
        parts.append("record(" + ", ".join(self.record_names) + ")")
        if self.filters:
            parts.append("where " + ", ".join(
                f"{f}={format_expr(v)}" for f, v in zip(self.filters.fields,
                                                       self.filters.values)))
        flags = [f for f, on in (("split", self.split), ("perm", self.perm),
                                 ("position-major", self.position_major is not None),
                                 ("dim-reduced", self.dim_reduced)) if on]
        if self.len_mode:
            flags.insert(0, self.len_mode)
        if flags:
            parts.append("[" + " ".join(flags) + "]")
        return " ".join(parts)

    def shape(self) -> tuple:
        """Hashable summary used for deduplication; ignores variable names."""
        levels = tuple((l.fields, l.block[1] if l.block else None) for l in self.levels)
        return (self.reservoir, self.record_names, levels, self.filters, self.join,
                self.len_mode, self.dim_reduced, self.split, self.perm,
                self.position_major is not None)


# --------------------------------------------------------------------------
# static evaluation of extents and filters

def static_value(expr, sizes: Mapping[str, int], reservoirs: Mapping[str, TupleReservoir]):
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        try:
            return sizes[expr.name]
        except KeyError:
            raise ReservoirError(f"size {expr.name!r} is not bound") from None
    if isinstance(expr, Extent):
        return reservoirs[expr.reservoir].extent(expr.field)
    if isinstance(expr, BinOp):
        a = static_value(expr.lhs, sizes, reservoirs)
        b = static_value(expr.rhs, sizes, reservoirs)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "min":
            return min(a, b)
        if expr.op == "cdiv":
            return -(-a // b)
        return a / b
    raise ReservoirError(f"cannot evaluate {expr!r} statically")


def _matches(value, want) -> bool:
    if isinstance(want, Interval):
        lo_ok = value > want.lo
        return lo_ok and (want.hi is None or value < want.hi)
    return value == want


# --------------------------------------------------------------------------
# symbolic instance

def pad_leaf(storage: MaterializedStorage) -> dict:
    leaf = {r.name: (0.0 if r.kind == "data" else 0) for r in storage.records}
    leaf["_pad"] = True
    leaf["_src"] = None
    return leaf


class StorageInstance:
    """Contents of one storage for one bound reservoir.

    ``groups`` maps each group key (a tuple with one entry per level) to its
    leaves in canonical order: ascending by the original tuple.  Everything
    else is derived from ``groups`` according to the plan's flags.
    """

    def __init__(self, storage: MaterializedStorage, reservoirs: Mapping[str, TupleReservoir],
                 sizes: Mapping[str, int]):
        self.storage = storage
        self.extents = tuple(int(static_value(l.extent, sizes, reservoirs))
                             for l in storage.levels)
        self.groups: dict = {}
        for key, leaf in _leaves(storage, reservoirs, sizes):
            for v, e in zip(key, self.extents):
                if not 0 <= v < e:
                    raise ReservoirError(
                        f"tuple {leaf['_src']} lies outside level extent {e} of {storage.name}")
            self.groups.setdefault(key, []).append(leaf)
        self._derive()

    # group enumeration -----------------------------------------------------
    def block_geometry(self) -> list:
        """Per level: (block size or None, number of blocks, local extent)."""
        out = []
        for l, e in zip(self.storage.levels, self.extents):
            if l.block:
                x = l.block[1]
                out.append((x, -(-e // x), x))
            else:
                out.append((None, 1, e))
        return out

    def blocks(self) -> list:
        """Block index tuples in row-major order over blocked levels."""
        geo = self.block_geometry()
        return list(itertools.product(*[range(nb) for x, nb, _ in geo if x]))

    def block_keys(self, block: tuple) -> list:
        """Group keys of one block in row-major local order, including keys
        past the extent of a partial last block (they are always empty)."""
        geo = self.block_geometry()
        it = iter(block)
        ranges = []
        for x, nb, loc in geo:
            if x:
                b = next(it)
                ranges.append(range(b * x, b * x + x))
            else:
                ranges.append(range(loc))
        return list(itertools.product(*ranges))

    def all_keys(self) -> list:
        """Valid group keys in ascending order."""
        return list(itertools.product(*[range(e) for e in self.extents]))

    def layout_keys(self) -> list:
        return [k for b in self.blocks() for k in self.block_keys(b)]

    def length(self, key: tuple) -> int:
        return len(self.groups.get(key, ()))

    # derived sequences --------------------------------------------------------
    def _derive(self):
        st = self.storage
        self.lengths = {k: len(v) for k, v in self.groups.items()}
        self.width = max(self.lengths.values(), default=0)
        self.block_width = {}
        if st.blocked:
            for b in self.blocks():
                self.block_width[b] = max((self.length(k) for k in self.block_keys(b)),
                                          default=0)
        self.perm = None
        if st.perm:
            e = self.extents[0]
            self.perm = sorted(range(e), key=lambda g: -self.length((g,)))
        self.padded_groups = None
        if st.len_mode == "padded":
            pad = pad_leaf(st)
            self.padded_groups = {}
            for key in self.all_keys():
                w = self.width if not st.blocked else self.block_width[self.block_of(key)]
                leaves = self.groups.get(key, [])
                self.padded_groups[key] = leaves + [pad] * (w - len(leaves))
        self.diagonals = None
        if st.position_major is not None:
            self._derive_diagonals()
        self.flat = self.ptr = self.flat_keys = self.group_slot = None
        if st.dim_reduced:
            self._derive_flat()

    def block_of(self, key: tuple) -> tuple:
        return tuple(v // l.block[1] for v, l in zip(key, self.storage.levels) if l.block)

    def _derive_diagonals(self):
        order = self.perm if self.perm is not None else list(range(self.extents[0]))
        npos = self.width
        self.diagonals = []
        padded = self.storage.len_mode == "padded"
        for k in range(npos):
            if padded:
                diag = [(g, self.padded_groups[(g,)][k]) for g in order]
            else:
                diag = [(g, self.groups[(g,)][k]) for g in order if self.length((g,)) > k]
            self.diagonals.append(diag)

    def _derive_flat(self):
        self.flat, self.flat_keys, self.ptr = [], [], []
        if self.storage.position_major is not None:
            for diag in self.diagonals:
                self.ptr.append(len(self.flat))
                for g, leaf in diag:
                    self.flat.append(leaf)
                    self.flat_keys.append(g)
            self.ptr.append(len(self.flat))
            return
        self.group_slot = {}
        for n, key in enumerate(self.layout_keys()):
            self.group_slot[key] = n
            self.ptr.append(len(self.flat))
            self.flat.extend(self.groups.get(key, ()))
        self.ptr.append(len(self.flat))

    # accessors used by the interpreter ----------------------------------------
    def group(self, key: tuple) -> list:
        if self.padded_groups is not None:
            return self.padded_groups[key]
        return self.groups.get(key, [])

    def ptr_range(self, key: tuple) -> range:
        n = self.group_slot[key]
        return range(self.ptr[n], self.ptr[n + 1])

    def lengths_in_order(self) -> list:
        return [self.length(k) for k in self.all_keys()]

    def leaves(self):
        """Every real leaf once, in canonical order."""
        for key in sorted(self.groups):
            yield from self.groups[key]


def _leaves(storage: MaterializedStorage, reservoirs, sizes):
    filters = storage.filters
    fvals = ()
    if filters is not None:
        fvals = tuple(_static_filter(v, sizes, reservoirs) for v in filters.values)

    if storage.join is None:
        res = reservoirs[storage.reservoir]
        fpos = [res.schema.index(f) for f in filters.fields] if filters else []
        lpos = [[res.schema.index(f) for f in l.fields] for l in storage.levels]
        rec = [(r.name, r.kind, res.schema.index(r.source) if r.kind == "field" else r.source)
               for r in storage.records]
        for n, t in enumerate(res.tuples):
            if not all(_matches(t[p], v) for p, v in zip(fpos, fvals)):
                continue
            key = []
            for pos in lpos:
                vals = {t[p] for p in pos}
                if len(vals) != 1:
                    break
                key.append(vals.pop())
            else:
                leaf = {}
                for name, kind, src in rec:
                    leaf[name] = t[src] if kind == "field" else res.data[src][n]
                leaf["_pad"] = False
                leaf["_src"] = res.provenance[n]
                yield tuple(key), leaf
        return

    j = storage.join
    left, right = reservoirs[j.left], reservoirs[j.right]
    fpos = [left.schema.index(f) for f in filters.fields] if filters else []
    lp = left.schema.index(j.left_field)
    ridx = right.index((j.right_field,))
    for n, t in enumerate(left.tuples):
        if not all(_matches(t[p], v) for p, v in zip(fpos, fvals)):
            continue
        for m in ridx.get((t[lp],), ()):
            u = right.tuples[m]
            leaf = {}
            for r in storage.records:
                res, tup, pos = (left, t, n) if r.side == j.left_var else (right, u, m)
                leaf[r.name] = tup[res.schema.index(r.source)] if r.kind == "field" \
                    else res.data[r.source][pos]
            leaf["_pad"] = False
            leaf["_src"] = (left.provenance[n], right.provenance[m])
            yield (), leaf


def _static_filter(v, sizes, reservoirs):
    if isinstance(v, Interval):
        hi = None if v.hi is None else static_value(v.hi, sizes, reservoirs)
        return Interval(static_value(v.lo, sizes, reservoirs), hi)
    return static_value(v, sizes, reservoirs)
