"""Timing tables, top groups, weights and coverage-based selection."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

REL_EPS = 1e-12  # slack so exact ties at the threshold count as inside


class TimingError(ValueError):
    pass


class TimingTable:
    """exec(r, m): seconds per routine and matrix, complete over R x M."""

    def __init__(self, times: dict):
        rows = {}
        for (r, m), t in times.items():
            t = float(t)
            if not t > 0 or not np.isfinite(t):
                raise TimingError(f"time for ({r}, {m}) must be positive, got {t}")
            rows[(str(r), str(m))] = t
        self.routines = sorted({r for r, _ in rows})
        self.matrices = sorted({m for _, m in rows})
        if not self.routines:
            raise TimingError("empty timing table")
        missing = [(r, m) for r in self.routines for m in self.matrices if (r, m) not in rows]
        if missing:
            raise TimingError(f"table is incomplete, e.g. no time for {missing[0]}")
        self.times = rows

    def __call__(self, r: str, m: str) -> float:
        return self.times[(r, m)]

    def best(self, m: str) -> str:
        return min(self.routines, key=lambda r: (self.times[(r, m)], r))

    def scaled(self, m: str, c: float) -> "TimingTable":
        return TimingTable({(r, mm): t * (c if mm == m else 1.0)
                            for (r, mm), t in self.times.items()})

    def subset(self, matrices) -> "TimingTable":
        keep = set(matrices)
        return TimingTable({k: t for k, t in self.times.items() if k[1] in keep})

    @classmethod
    def from_matrix(cls, routines, matrices, values) -> "TimingTable":
        values = np.asarray(values, dtype=float)
        return cls({(r, m): values[i, j] for i, r in enumerate(routines)
                    for j, m in enumerate(matrices)})

    @classmethod
    def read_csv(cls, src) -> "TimingTable":
        """Parse ``routine,matrix,seconds`` rows (a header row is required)."""
        fh = open(src, encoding="utf-8") if isinstance(src, str) else src
        try:
            reader = csv.DictReader(fh)
            need = {"routine", "matrix", "seconds"}
            if not reader.fieldnames or not need <= set(reader.fieldnames):
                raise TimingError("timing CSV needs columns routine,matrix,seconds")
            times = {}
            for n, row in enumerate(reader, start=2):
                key = (row["routine"], row["matrix"])
                if key in times:
                    raise TimingError(f"line {n}: duplicate row for {key}")
                try:
                    times[key] = float(row["seconds"])
                except ValueError:
                    raise TimingError(f"line {n}: bad seconds {row['seconds']!r}") from None
        finally:
            if isinstance(src, str):
                fh.close()
        return cls(times)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["routine", "matrix", "seconds"])
        for (r, m), t in sorted(self.times.items()):
            w.writerow([r, m, repr(t)])
        return buf.getvalue()


def top_group(table: TimingTable, m: str, t_percent: float) -> set:
    """Routines at most t% slower than the best on matrix ``m``."""
    if t_percent < 0:
        raise ValueError("t must be nonnegative")
    best = table(table.best(m), m)
    limit = best * (1.0 + t_percent / 100.0) * (1.0 + REL_EPS)
    return {r for r in table.routines if table(r, m) <= limit}


@dataclass(frozen=True)
class CoverageReport:
    t_percent: float
    best: dict  # matrix -> best routine
    top: dict  # matrix -> frozenset of routines
    weights: dict  # routine -> weight
    coverage: int
    argmax: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["routine", "weight", "is_argmax", "t_percent", "coverage"])
        for r, wt in sorted(self.weights.items()):
            w.writerow([r, wt, int(r in self.argmax), self.t_percent, self.coverage])
        return buf.getvalue()


def coverage(table: TimingTable, t_percent: float) -> CoverageReport:
    top = {m: frozenset(top_group(table, m, t_percent)) for m in table.matrices}
    weights = {r: sum(r in top[m] for m in table.matrices) for r in table.routines}
    cov = max(weights.values())
    argmax = tuple(sorted(r for r, w in weights.items() if w == cov))
    best = {m: table.best(m) for m in table.matrices}
    return CoverageReport(t_percent, best, top, weights, cov, argmax)


def coverage_curve(table: TimingTable, t_grid) -> list:
    """[(t, coverage, argmax routines)] over an ascending grid."""
    grid = [float(t) for t in t_grid]
    if grid != sorted(grid):
        raise ValueError("t grid must be sorted ascending")
    out = []
    for t in grid:
        rep = coverage(table, t)
        out.append((t, rep.coverage, rep.argmax))
    return out


def curve_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_percent", "coverage", "argmax_routines"])
    for t, c, arg in curve:
        w.writerow([f"{t:g}", c, ";".join(arg)])
    return buf.getvalue()


@dataclass(frozen=True)
class Selection:
    sample: tuple
    t_percent: float
    routines: tuple

    @property
    def message(self) -> str:
        if not self.routines:
            return (f"no single routine within {self.t_percent:g}% on all "
                    f"{len(self.sample)} sampled matrices")
        return ",".join(self.routines)


def select_kernel(table: TimingTable, k: int = 4, t_percent: float = 2.0,
                  seed: int = 0) -> Selection:
    """Sample k matrices; keep routines inside the top group of every one."""
    if not 1 <= k <= len(table.matrices):
        raise ValueError(f"k must be in [1, {len(table.matrices)}], got {k}")
    rng = np.random.default_rng(seed)
    idx = sorted(rng.choice(len(table.matrices), size=k, replace=False))
    sample = tuple(table.matrices[i] for i in idx)
    rep = coverage(table.subset(sample), t_percent)
    chosen = tuple(sorted(r for r, w in rep.weights.items() if w == k))
    return Selection(sample, t_percent, chosen)
