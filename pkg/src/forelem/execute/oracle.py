"""Dense reference results, computed without any forelem machinery."""
from __future__ import annotations

import numpy as np

from .operands import OperandError, SparseOperand

MAX_DENSE = 4096


def _dense(matrix: SparseOperand) -> np.ndarray:
    if max(matrix.shape) > MAX_DENSE:
        raise OperandError(
            f"matrix {matrix.shape} is too large for dense expansion (limit {MAX_DENSE})")
    return matrix.to_dense()


def reference_oracle(kind: str, matrix: SparseOperand, *inputs, lower: bool = False):
    """Textbook dense kernels: y = A x, Y = A X, or a triangular solve."""
    a = _dense(matrix)
    if kind == "spmv":
        x = np.asarray(inputs[0], dtype=np.float64).ravel()
        if x.shape != (matrix.n_cols,):
            raise OperandError(f"input vector has {x.size} entries, need {matrix.n_cols}")
        y = np.zeros(matrix.n_rows)
        for i in range(matrix.n_rows):
            y[i] = sum(a[i, j] * x[j] for j in range(matrix.n_cols))
        return y
    if kind == "spmm":
        x = np.asarray(inputs[0], dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != matrix.n_cols:
            raise OperandError(f"input block has shape {x.shape}, need ({matrix.n_cols}, k)")
        return a @ x
    if kind == "trsv":
        b = np.asarray(inputs[0], dtype=np.float64).ravel().copy()
        n = matrix.n_rows
        if matrix.n_cols != n or b.shape != (n,):
            raise OperandError("triangular solve needs a square matrix and a matching vector")
        check_triangular(matrix, lower)
        x = np.zeros(n)
        order = range(n) if lower else range(n - 1, -1, -1)
        for i in order:
            s = b[i]
            cols = range(i) if lower else range(i + 1, n)
            for j in cols:
                s -= a[i, j] * x[j]
            x[i] = s / a[i, i]
        return x
    raise ValueError(f"unknown kernel {kind!r}")


def check_triangular(matrix: SparseOperand, lower: bool = False):
    if matrix.n_rows != matrix.n_cols:
        raise OperandError("triangular solve needs a square matrix")
    bad = matrix.cols > matrix.rows if lower else matrix.cols < matrix.rows
    if bad.any():
        side = "upper" if lower else "lower"
        raise OperandError(f"matrix has entries in the strict {side} triangle")
    diag = np.zeros(matrix.n_rows, dtype=bool)
    on = matrix.rows == matrix.cols
    diag[matrix.rows[on]] = matrix.values[on] != 0
    if not diag.all():
        raise OperandError(f"missing or zero diagonal entry in row {int(np.argmin(diag))}")


def max_rel_err(got, want) -> float:
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    if got.shape != want.shape:
        raise OperandError(f"shape mismatch {got.shape} vs {want.shape}")
    if got.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(want))), np.finfo(float).tiny)
    return float(np.max(np.abs(got - want)) / scale)
