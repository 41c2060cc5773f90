"""Benchmark harness: every variant on every matrix, one CSV row each."""
from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from ..execute.operands import SparseOperand
from ..execute.oracle import max_rel_err, reference_oracle
from ..execute.runner import build_time, run_variant
from ..ingest.mmio import read_matrix_market
from ..ingest.synth import synth_matrix, triangular_part
from ..ir.kernels import builtin_kernel
from .coverage import TimingTable


@dataclass(frozen=True)
class BenchRow:
    matrix: str
    kernel: str
    variant_id: str
    format: str
    repeats: int
    median_seconds: float
    build_seconds: float
    max_rel_err: float


COLUMNS = tuple(f.name for f in fields(BenchRow))


def kernel_inputs(kernel: str, matrix: SparseOperand, seed: int = 0) -> tuple:
    """Seeded dense inputs of the right extents for ``kernel``."""
    spec = builtin_kernel(kernel)
    rng = np.random.default_rng(seed)
    n, m = matrix.shape
    if spec.kind == "spmm":
        return (rng.uniform(-1, 1, size=(m, spec.k)),)
    if spec.kind == "trsv":
        return (rng.uniform(-1, 1, size=n),)
    return (rng.uniform(-1, 1, size=m),)


def kernel_matrix(kernel: str, matrix: SparseOperand) -> SparseOperand:
    """Triangular solves run on the unit-diagonal triangle of the input."""
    spec = builtin_kernel(kernel)
    if spec.kind == "trsv":
        return triangular_part(matrix, lower=spec.lower, unit_diag=True)
    return matrix


def oracle_for(kernel: str, matrix: SparseOperand, inputs) -> np.ndarray:
    spec = builtin_kernel(kernel)
    return reference_oracle(spec.kind, matrix, *inputs, lower=spec.lower)


def load_matrices(directory) -> dict:
    """All ``*.mtx`` files of a directory, keyed by file stem."""
    paths = sorted(Path(directory).glob("*.mtx"))
    return {p.stem: read_matrix_market(p) for p in paths}


def synthetic_corpus(count: int, n: int = 32, density: float = 0.1, seed: int = 0) -> dict:
    """A small mixed corpus: uniform, banded and skewed-row matrices."""
    out = {}
    kinds = ("uniform", "banded", "skewed-rows")
    for i in range(count):
        kind = kinds[i % 3]
        nnz = max(1, int(density * n * n))
        if kind == "banded":
            nnz = min(nnz, n * 3 - 2)
        out[f"{kind}-{i}"] = synth_matrix(n, nnz, kind, seed + i, width=1)
    return out


def bench(kernel: str, matrices: dict, variants, repeats: int = 10, seed: int = 0) -> list:
    """Run the full variant x matrix grid serially; returns BenchRows."""
    rows = []
    for mname, raw in matrices.items():
        matrix = kernel_matrix(kernel, raw)
        inputs = kernel_inputs(kernel, matrix, seed)
        ref = oracle_for(kernel, matrix, inputs)
        for v in variants:
            res = run_variant(v, matrix, *inputs, repeats=repeats)
            rows.append(BenchRow(mname, kernel, v.id, v.format, repeats, res.wall_time,
                                 build_time(v, matrix), max_rel_err(res.output, ref)))
    return rows


def rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in astuple(r)])
    return buf.getvalue()


def timing_table(rows) -> TimingTable:
    """Kernel times of bench rows as a coverage table keyed by variant id."""
    return TimingTable({(r.variant_id, r.matrix): r.median_seconds for r in rows})
