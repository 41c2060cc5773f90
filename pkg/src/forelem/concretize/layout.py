"""Physical layout rules for materialized storages.

One :class:`StorageLayout` per storage decides which physical components
exist and how a symbolic access turns into an index expression over them.
Group keys are flattened row-major; blocked storages keep one component
slice per block.

==========================  ==========================  =================
storage state               leaf of group g, slot k     group length
==========================  ==========================  =================
compact                     ``g * width + k``           ``len[g]``
padded                      ``k * groups + g``          ``len`` (scalar)
dimensionality-reduced      ``ptr[g] <= q < ptr[g+1]``  from ``ptr``
position-major              ``k * groups + p``          ``len[k]``
==========================  ==========================  =================
"""
from __future__ import annotations

from dataclasses import dataclass

from ..ir.nodes import BinOp, Const, Extent, Index, Var, map_expr
from ..transform.storage import MaterializedStorage


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    kind: str  # value | row-index | column-index | index | length | offset | ...
    storage: str
    extents: tuple  # symbolic
    layout: str  # flat | row-major | column-major | scalar
    ragged: bool = False  # one slice per block

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "extents": list(self.extents),
                "layout": self.layout}


def extent_name(reservoir: str, fld: str) -> str:
    return f"ext_{reservoir}_{fld}"


def lower_extent(e):
    def fn(x):
        if isinstance(x, Extent):
            return Index(extent_name(x.reservoir, x.field), ())
        return x
    return map_expr(e, fn)


def _mul(a, b):
    if a == Const(0) or b == Const(0):
        return Const(0)
    if a == Const(1):
        return b
    if b == Const(1):
        return a
    return BinOp("*", a, b)


def _add(a, b):
    if a == Const(0):
        return b
    if b == Const(0):
        return a
    return BinOp("+", a, b)


def _fold(indices, extents):
    """Row-major flattening of ``indices`` over ``extents``."""
    out = Const(0)
    for i, e in zip(indices, extents):
        out = _add(_mul(out, e), i)
    return out


def field_kind(st: MaterializedStorage, rec) -> str:
    if rec.kind == "data":
        return "value"
    return {"row": "row-index", "col": "column-index"}.get(rec.source, "index")


class StorageLayout:
    def __init__(self, st: MaterializedStorage):
        self.st = st
        self.name = st.name
        self.pm = st.position_major is not None
        self.blocked = st.blocked

    # naming ---------------------------------------------------------------
    def comp(self, suffix: str) -> str:
        return f"{self.name}_{suffix}"

    def field_comp(self, fld: str) -> str:
        return self.comp(fld) if self.st.split else self.name

    # index helpers ----------------------------------------------------------
    def _at(self, name, b, i):
        return Index(name, (b, i)) if b is not None else Index(name, (i,))

    def _scalar(self, name, b):
        return Index(name, (b,)) if b is not None else Index(name, ())

    def level_extent(self, n: int):
        return self.st.levels[n].extent

    def local_extents(self) -> list:
        return [Const(l.block[1]) if l.block else self.level_extent(n)
                for n, l in enumerate(self.st.levels)]

    def groups_expr(self):
        out = Const(1)
        for e in self.local_extents():
            out = _mul(out, e)
        return out

    def block_index(self, block_vars):
        nbs = [BinOp("cdiv", self.level_extent(n), Const(l.block[1]))
               for n, l in enumerate(self.st.levels) if l.block]
        return _fold(block_vars, nbs)

    def group_and_block(self, prefix):
        """(block index or None, local group index) for a group key."""
        if not self.blocked:
            return None, _fold(prefix, self.local_extents())
        local, bvars = [], []
        for l, e in zip(self.st.levels, prefix):
            if l.block:
                bv, x = l.block
                local.append(BinOp("-", e, BinOp("*", Var(bv), Const(x))))
                bvars.append(Var(bv))
            else:
                local.append(e)
        return self.block_index(bvars), _fold(local, self.local_extents())

    # accesses ----------------------------------------------------------------
    def leaf(self, indices):
        st = self.st
        if st.dim_reduced:
            if self.pm or not self.blocked:
                return None, indices[-1]
            # the block comes from the enclosing block loops
            b, _ = self.group_and_block([Var(l.var) for l in st.levels])
            return b, indices[-1]
        if self.pm:
            k, p = indices
            return None, _add(_mul(k, self.level_extent(0)), p)
        if st.depth == 0:
            return None, indices[-1]
        b, g = self.group_and_block(indices[:-1])
        k = indices[-1]
        if st.len_mode == "padded":
            return b, _add(_mul(k, self.groups_expr()), g)
        return b, _add(_mul(g, self._scalar(self.comp("width"), b)), k)

    def field(self, indices, fld: str):
        b, i = self.leaf(indices)
        if self.st.split:
            return self._at(self.comp(fld), b, i)
        w = len(self.st.records)
        fi = self.st.record_names.index(fld)
        return self._at(self.name, b, _add(_mul(i, Const(w)), Const(fi)))

    def key(self, indices):
        k, p = indices
        st = self.st
        if st.dim_reduced:
            if st.perm:
                start = Index(self.comp("ptr"), (k,))
                return Index(self.comp("perm"), (BinOp("-", p, start),))
            return Index(self.comp("key"), (p,))
        if st.perm:
            return Index(self.comp("perm"), (p,))
        if st.len_mode == "padded":
            return p
        return Index(self.comp("key"), (_add(_mul(k, self.level_extent(0)), p),))

    def length(self, prefix, level: int):
        st = self.st
        if self.pm:
            if level == 0:
                return Index(self.comp("npos"), ())
            if not prefix:
                return self.level_extent(0)
            return Index(self.comp("len"), (prefix[0],))
        if st.len_mode == "padded":
            b = self.block_index(list(prefix)) if self.blocked else None
            return self._scalar(self.comp("len"), b)
        if st.depth == 0:
            return Index(self.comp("len"), ())
        b, g = self.group_and_block(prefix)
        return self._at(self.comp("len"), b, g)

    def offsets(self, prefix):
        if self.pm:
            k = prefix[0]
            return Index(self.comp("ptr"), (k,)), Index(self.comp("ptr"), (_add(k, Const(1)),))
        b, g = self.group_and_block(prefix)
        return self._at(self.comp("ptr"), b, g), self._at(self.comp("ptr"), b, _add(g, Const(1)))

    def perm(self, p):
        return Index(self.comp("perm"), (p,))

    # component inventory ------------------------------------------------------
    def components(self) -> list:
        st, out = self.st, []
        rag = self.blocked
        pre = ("blocks",) if rag else ()
        if st.dim_reduced:
            leaf_ext, layout = ("leaves",), "flat"
        elif st.depth == 0:
            leaf_ext, layout = ("leaves",), "flat"
        elif self.pm or st.len_mode == "padded":
            leaf_ext, layout = ("width", "groups"), "column-major"
        else:
            leaf_ext, layout = ("groups", "width"), "row-major"
        if st.split:
            for r in st.records:
                out.append(ComponentSpec(self.comp(r.name), field_kind(st, r), st.name,
                                         pre + leaf_ext, layout, rag))
        else:
            out.append(ComponentSpec(self.name, "record", st.name,
                                     pre + leaf_ext + (f"{len(st.records)} fields",),
                                     layout, rag))
        if self.pm:
            out.append(ComponentSpec(self.comp("npos"), "length", st.name, (), "scalar"))
            if st.dim_reduced:
                out.append(ComponentSpec(self.comp("ptr"), "offset", st.name,
                                         ("width+1",), "flat"))
            elif st.len_mode == "compact":
                out.append(ComponentSpec(self.comp("len"), "length", st.name,
                                         ("width",), "flat"))
            if not st.perm and (st.dim_reduced or st.len_mode == "compact"):
                out.append(ComponentSpec(self.comp("key"), self._key_kind(), st.name,
                                         leaf_ext, layout))
        elif st.dim_reduced:
            out.append(ComponentSpec(self.comp("ptr"), "offset", st.name,
                                     pre + ("groups+1",), "flat", rag))
        elif st.len_mode == "padded":
            out.append(ComponentSpec(self.comp("len"), "length", st.name,
                                     pre, "flat" if rag else "scalar", rag))
        elif st.depth == 0:
            out.append(ComponentSpec(self.comp("len"), "length", st.name, (), "scalar"))
        else:
            out.append(ComponentSpec(self.comp("len"), "length", st.name,
                                     pre + ("groups",), "flat", rag))
            out.append(ComponentSpec(self.comp("width"), "length", st.name,
                                     pre, "flat" if rag else "scalar", rag))
        if st.perm:
            out.append(ComponentSpec(self.comp("perm"), "permutation", st.name,
                                     ("groups",), "flat"))
        return out

    def _key_kind(self) -> str:
        f = self.st.levels[0].fields
        if f == ("row",):
            return "row-index"
        if f == ("col",):
            return "column-index"
        return "index"
