"""Concretization: symbolic loops and storages to ordered loops over arrays."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from ..ir.nodes import (
    Assign, Const, DataRef, Extent, FieldRef, FieldValues, For, Index, Join, KeyRef, Lens,
    NStar, Perm, Program, Ptr, Range, ReservoirDomain, SeqRef, Var, all_names, fresh, map_expr,
)
from ..transform.passes import nstar_materialize
from ..transform.storage import MaterializedStorage
from .formats import recognize_format, storage_shape
from .layout import ComponentSpec, StorageLayout, extent_name


class ConcretizeError(ValueError):
    pass


@dataclass(frozen=True)
class StorageDescriptor:
    components: tuple  # ComponentSpec
    storages: tuple  # per-storage shape dicts, see formats.storage_shape
    extents: tuple = ()  # (reservoir, field) pairs lowered to scalar components
    block_geometry: Optional[tuple] = None

    @property
    def padded(self) -> bool:
        return any(s["len_mode"] == "padded" for s in self.storages)

    @property
    def split(self) -> bool:
        return all(s["split"] for s in self.storages)

    def shape_key(self) -> str:
        return json.dumps({"components": [c.to_json() for c in self.components],
                           "storages": list(self.storages)}, sort_keys=True)

    def to_json(self) -> dict:
        return {"components": [c.to_json() for c in self.components],
                "block_geometry": list(self.block_geometry) if self.block_geometry else None}


@dataclass(frozen=True)
class ConcreteVariant:
    id: str
    pipeline: str
    program: Program  # lowered: ordered loops over physical components only
    storage: StorageDescriptor
    format: str
    plans: tuple = ()  # MaterializedStorage plans the components are built from
    kernel: str = ""
    source: Optional[Program] = field(default=None, compare=False)

    def to_json(self) -> dict:
        out = {"id": self.id, "pipeline": self.pipeline, "format": self.format}
        out.update(self.storage.to_json())
        return out

    def describe(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def variant_id(pipeline: str) -> str:
    return hashlib.sha1(pipeline.encode()).hexdigest()[:12]


def _check_storage_ready(st: MaterializedStorage):
    if st.len_mode is None and st.depth > 0:
        raise ConcretizeError(f"{st.name} still has a symbolic N* index set")


def settle(program: Program) -> Program:
    """Fix remaining flat N* sets, which always know their own length."""
    for st in program.storages:
        _check_storage_ready(st)
        if st.len_mode is None:
            program = nstar_materialize(program, st.name, "compact")
    return program


def lower(program: Program) -> tuple:
    """Return (lowered program, descriptor) or raise ConcretizeError."""
    program = settle(program)
    layouts = {st.name: StorageLayout(st) for st in program.storages}
    taken = set(all_names(program))
    extents = {}

    def lower_e(e):
        def fn(x):
            if isinstance(x, (FieldRef, DataRef)):
                raise ConcretizeError(f"residual tuple access {x}")
            if isinstance(x, Extent):
                extents[(x.reservoir, x.field)] = None
                return Index(extent_name(x.reservoir, x.field), ())
            # layout expressions may mention extents, so lower them again
            if isinstance(x, SeqRef):
                return lower_e(layouts[x.storage].field(x.indices, x.field))
            if isinstance(x, KeyRef):
                return lower_e(layouts[x.storage].key(x.indices))
            return x
        return map_expr(e, fn)

    def lower_body(body):
        return tuple(lower_s(s) for s in body)

    def lower_s(s):
        if isinstance(s, Assign):
            return Assign(lower_e(s.target), s.op, lower_e(s.value))
        if isinstance(s, For):
            return For(s.var, lower_e(s.lo), lower_e(s.hi), s.descending, lower_body(s.body))
        d = s.domain
        body = lower_body(s.body)
        if isinstance(d, Range):
            return For(s.var, lower_e(d.lo), lower_e(d.hi), False, body)
        if isinstance(d, Lens):
            hi = layouts[d.storage].length(d.prefix, d.level)
            return For(s.var, Const(0), lower_e(hi), False, body)
        if isinstance(d, Ptr):
            lo, hi = layouts[d.storage].offsets(d.prefix)
            return For(s.var, lower_e(lo), lower_e(hi), False, body)
        if isinstance(d, Perm):
            pv = fresh(taken, "pos")
            taken.add(pv)
            pick = Assign(Var(s.var), "=", lower_e(layouts[d.storage].perm(Var(pv))))
            return For(pv, lower_e(d.inner.lo), lower_e(d.inner.hi), False, (pick,) + body)
        if isinstance(d, NStar):
            raise ConcretizeError(f"residual symbolic domain nstar({d.storage})")
        if isinstance(d, (ReservoirDomain, FieldValues, Join)):
            raise ConcretizeError("residual reservoir condition or domain")
        raise ConcretizeError(f"cannot concretize domain {d!r}")

    body = lower_body(program.body)
    comps = []
    for st in program.storages:
        comps.extend(layouts[st.name].components())
    for res, fld in sorted(extents):
        comps.append(ComponentSpec(extent_name(res, fld), "extent", "", (), "scalar"))
    geometry = _block_geometry(program.storages)
    desc = StorageDescriptor(tuple(comps), tuple(storage_shape(st) for st in program.storages),
                             tuple(sorted(extents)), geometry)
    lowered = Program(dense=program.dense, body=body)
    return lowered, desc


def _block_geometry(storages) -> Optional[tuple]:
    sizes = tuple(l.block[1] if l.block else None
                  for st in storages for l in st.levels if st.blocked)
    return sizes or None


def concretize(program: Program, pipeline: str = "", kernel: str = "") -> ConcreteVariant:
    program = settle(program)
    lowered, desc = lower(program)
    fmt = recognize_format(desc)
    return ConcreteVariant(variant_id(pipeline), pipeline, lowered, desc, fmt,
                           tuple(program.storages), kernel, program)
