"""Filling physical components from a bound reservoir."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..ir.reservoir import TupleReservoir
from ..transform.storage import MaterializedStorage, StorageInstance, pad_leaf
from .layout import StorageLayout, extent_name


class BuildError(ValueError):
    pass


@dataclass
class PhysicalStorage:
    """Physical components of one or more storages, keyed by name."""
    components: dict
    specs: tuple  # ComponentSpec of each component
    instances: dict  # storage name -> StorageInstance
    shapes: dict = None  # 2-D component name -> extent pair in layout order

    def array(self, name: str):
        v = self.components[name]
        if isinstance(v, list) and v and isinstance(v[0], list):
            return [np.asarray(x) for x in v]
        return np.asarray(v)

    def extents(self, name: str) -> list:
        v = self.components[name]
        if self.shapes and name in self.shapes:
            return list(self.shapes[name])
        if not isinstance(v, list):
            return []
        if v and isinstance(v[0], list):
            return [len(v), [len(x) for x in v]]
        return [len(v)]

    def to_json(self) -> dict:
        out = []
        for spec in self.specs:
            v = self.components[spec.name]
            data = v if isinstance(v, list) else v
            out.append({"name": spec.name, "kind": spec.kind, "layout": spec.layout,
                        "extents": self.extents(spec.name), "data": data})
        return {"components": out}

    def logical(self, storage: str, fld: str) -> list:
        """Per-group view of one record field; padded groups include pads."""
        inst = self.instances[storage]
        out = []
        for key in inst.all_keys():
            out.append([leaf[fld] for leaf in inst.group(key)])
        return out


def _data_names(st: MaterializedStorage) -> list:
    if st.split:
        return [f"{st.name}_{r.name}" for r in st.records]
    return [st.name]


def _fill(st: MaterializedStorage, leaves, out: dict, rag: bool):
    """Append one (block) slice of leaves to the data components."""
    if st.split:
        for r in st.records:
            col = [leaf[r.name] for leaf in leaves]
            _put(out, f"{st.name}_{r.name}", col, rag)
    else:
        rec = []
        for leaf in leaves:
            rec.extend(leaf[n] for n in st.record_names)
        _put(out, st.name, rec, rag)


def _put(out, name, value, rag):
    if rag:
        out.setdefault(name, []).append(value)
    else:
        out[name] = value


def build_components(st: MaterializedStorage, inst: StorageInstance, shapes=None) -> dict:
    """Physical components of one storage; 2-D extents go into ``shapes``."""
    out = {}
    shapes = {} if shapes is None else shapes
    pad = pad_leaf(st)
    name = st.name
    if st.position_major is not None:
        groups = inst.extents[0]
        diags = inst.diagonals
        out[f"{name}_npos"] = len(diags)
        if st.dim_reduced:
            _fill(st, inst.flat, out, False)
            out[f"{name}_ptr"] = list(inst.ptr)
            if not st.perm:
                out[f"{name}_key"] = list(inst.flat_keys)
        else:
            leaves, keys = [], []
            for diag in diags:
                leaves.extend(leaf for _, leaf in diag)
                keys.extend(g for g, _ in diag)
                leaves.extend([pad] * (groups - len(diag)))
                keys.extend([0] * (groups - len(diag)))
            _fill(st, leaves, out, False)
            for c in _data_names(st):
                shapes[c] = (len(diags), groups)
            if st.len_mode == "compact":
                out[f"{name}_len"] = [len(d) for d in diags]
                if not st.perm:
                    out[f"{name}_key"] = keys
        if st.perm:
            out[f"{name}_perm"] = list(inst.perm)
        return out

    rag = st.blocked
    slices = [(b, inst.block_keys(b)) for b in inst.blocks()]
    for b, keys in slices:
        groups = [inst.groups.get(k, []) for k in keys]
        if st.dim_reduced:
            ptr, flat = [0], []
            for g in groups:
                flat.extend(g)
                ptr.append(len(flat))
            _fill(st, flat, out, rag)
            _put(out, f"{name}_ptr", ptr, rag)
            continue
        if st.depth == 0:
            _fill(st, groups[0], out, False)
            out[f"{name}_len"] = len(groups[0])
            continue
        width = max((len(g) for g in groups), default=0)
        if st.len_mode == "padded":
            leaves = [g[k] if k < len(g) else pad for k in range(width) for g in groups]
            _fill(st, leaves, out, rag)
            _put(out, f"{name}_len", width, rag)
            if not rag:
                for c in _data_names(st):
                    shapes[c] = (width, len(groups))
        else:
            leaves = []
            for g in groups:
                leaves.extend(g)
                leaves.extend([pad] * (width - len(g)))
            _fill(st, leaves, out, rag)
            if not rag:
                for c in _data_names(st):
                    shapes[c] = (len(groups), width)
            _put(out, f"{name}_len", [len(g) for g in groups], rag)
            _put(out, f"{name}_width", width, rag)
    if rag:
        # no blocks at all (empty matrix): ragged components are empty lists
        extra = ["ptr"] if st.dim_reduced else ["len", "width"]
        for c in _data_names(st) + [f"{name}_{e}" for e in extra]:
            if c.endswith("_width") and st.len_mode == "padded":
                continue
            out.setdefault(c, [])
    if st.perm:
        out[f"{name}_perm"] = list(inst.perm)
    return out


def build_storage(storage, reservoirs, sizes=None, extents=()) -> PhysicalStorage:
    """Physical components for one storage plan (or several) and a reservoir.

    ``reservoirs`` may be a single :class:`TupleReservoir`, bound to the
    name each plan materializes, or a mapping of names to reservoirs.
    """
    plans = storage if isinstance(storage, (list, tuple)) else (storage,)
    if isinstance(reservoirs, TupleReservoir):
        reservoirs = {st.reservoir: reservoirs for st in plans}
        if any(st.join for st in plans):
            raise BuildError("join storages need a mapping of reservoirs")
    sizes = dict(sizes or {})
    comps, specs, insts, shapes = {}, [], {}, {}
    for st in plans:
        if st.len_mode is None:
            raise BuildError(f"{st.name} has no N* materialization yet")
        inst = StorageInstance(st, reservoirs, sizes)
        insts[st.name] = inst
        comps.update(build_components(st, inst, shapes))
        specs.extend(StorageLayout(st).components())
    for res, fld in extents:
        comps[extent_name(res, fld)] = reservoirs[res].extent(fld)
    from .layout import ComponentSpec
    specs.extend(ComponentSpec(extent_name(r, f), "extent", "", (), "scalar")
                 for r, f in extents)
    _check(specs, comps)
    return PhysicalStorage(comps, tuple(specs), insts, shapes)


def _check(specs, comps):
    for spec in specs:
        if spec.name not in comps:
            raise BuildError(f"component {spec.name} was not built")
    for name in comps:
        if name.endswith("_ptr"):
            seqs = comps[name] if comps[name] and isinstance(comps[name][0], list) \
                else [comps[name]]
            for p in seqs:
                if p and (p[0] != 0 or any(b < a for a, b in zip(p, p[1:]))):
                    raise BuildError(f"offsets {name} are not monotone from 0")


def timed_build(storage, reservoirs, sizes=None, extents=()) -> tuple:
    t0 = time.perf_counter()
    phys = build_storage(storage, reservoirs, sizes, extents)
    return phys, max(time.perf_counter() - t0, 1e-9)
