"""Tuple reservoirs: sets of integer tuples plus their address functions."""
from __future__ import annotations

from typing import Dict, Iterable, Mapping, Sequence


class ReservoirError(ValueError):
    pass


class TupleReservoir:
    """A set of integer tuples over a named schema.

    Tuples are kept in ascending lexicographic order; that order is only an
    implementation convenience, forelem loops promise none.  ``data`` maps
    each address-function name to a sequence aligned with ``tuples``.
    """

    def __init__(self, schema: Sequence[str], tuples: Iterable[Sequence[int]],
                 data: Mapping[str, Mapping[tuple, float]] | None = None):
        self.schema = tuple(schema)
        if len(set(self.schema)) != len(self.schema) or not all(self.schema):
            raise ReservoirError(f"bad schema {self.schema!r}")
        raw = [tuple(int(v) for v in t) for t in tuples]
        rows = sorted(set(raw))
        if len(rows) != len(raw):
            raise ReservoirError("duplicate tuples in reservoir")
        for t in rows:
            if len(t) != len(self.schema):
                raise ReservoirError(f"tuple {t} does not match schema {self.schema}")
            if any(v < 0 for v in t):
                raise ReservoirError(f"negative field value in {t}")
        self.tuples = tuple(rows)
        self.data: Dict[str, tuple] = {}
        for name, mapping in (data or {}).items():
            try:
                self.data[name] = tuple(mapping[t] for t in self.tuples)
            except KeyError as exc:
                raise ReservoirError(f"binding {name!r} is not total: missing {exc}") from None
        self.provenance = self.tuples  # original tuple behind each entry
        self._columns: Dict[str, tuple] = {}
        self._indexes: Dict[tuple, dict] = {}

    def __len__(self) -> int:
        return len(self.tuples)

    def __repr__(self) -> str:
        return f"TupleReservoir(schema={self.schema}, n={len(self.tuples)})"

    @classmethod
    def from_columns(cls, schema, columns, data=None):
        tuples = list(zip(*columns)) if columns else []
        bound = {}
        for name, vals in (data or {}).items():
            bound[name] = dict(zip((tuple(int(v) for v in t) for t in tuples), vals))
        return cls(schema, tuples, bound)

    def column(self, fld: str) -> tuple:
        col = self._columns.get(fld)
        if col is None:
            try:
                pos = self.schema.index(fld)
            except ValueError:
                raise ReservoirError(f"no field {fld!r} in {self.schema}") from None
            col = tuple(t[pos] for t in self.tuples)
            self._columns[fld] = col
        return col

    def values(self, fld: str) -> list:
        return sorted(set(self.column(fld)))

    def extent(self, fld: str) -> int:
        col = self.column(fld)
        return max(col) + 1 if col else 0

    def index(self, fields: tuple) -> dict:
        """Map from field-value tuple to ascending tuple positions."""
        idx = self._indexes.get(fields)
        if idx is None:
            cols = [self.column(f) for f in fields]
            idx = {}
            for n in range(len(self.tuples)):
                idx.setdefault(tuple(c[n] for c in cols), []).append(n)
            self._indexes[fields] = idx
        return idx

    def project(self, fields: Sequence[str]) -> "TupleReservoir":
        """Projection onto ``fields``; refuses to merge distinct tuples."""
        fields = tuple(fields)
        pos = [self.schema.index(f) for f in fields]
        seen: Dict[tuple, int] = {}
        for n, t in enumerate(self.tuples):
            key = tuple(t[p] for p in pos)
            if key in seen:
                m = seen[key]
                differ = [name for name, vals in self.data.items() if vals[m] != vals[n]]
                what = f"bindings {differ} differ" if differ else "tuples would merge"
                raise ReservoirError(
                    f"projection onto {fields} collapses {self.tuples[m]} and {t}: {what}")
            seen[key] = n
        data = {name: {tuple(t[p] for p in pos): v for t, v in zip(self.tuples, vals)}
                for name, vals in self.data.items()}
        proj = TupleReservoir(fields, list(seen), data)
        proj.provenance = tuple(self.provenance[seen[t]] for t in proj.tuples)
        return proj
