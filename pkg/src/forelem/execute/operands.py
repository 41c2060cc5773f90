"""Sparse and dense operands and their binding to kernel programs."""
from __future__ import annotations

import numpy as np

from ..ir.reservoir import TupleReservoir


class OperandError(ValueError):
    pass


class SparseOperand:
    """A sparse matrix as a set of (row, col, value) entries, 0-based."""

    def __init__(self, n_rows: int, n_cols: int, rows, cols, values):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        if self.n_rows < 0 or self.n_cols < 0:
            raise OperandError("negative matrix extent")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if not (len(rows) == len(cols) == len(values)):
            raise OperandError("row, column and value arrays differ in length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= self.n_rows:
                raise OperandError(f"row index outside [0, {self.n_rows})")
            if cols.min() < 0 or cols.max() >= self.n_cols:
                raise OperandError(f"column index outside [0, {self.n_cols})")
        order = np.lexsort((cols, rows))
        self.rows, self.cols, self.values = rows[order], cols[order], values[order]
        if len(rows) > 1:
            same = (np.diff(self.rows) == 0) & (np.diff(self.cols) == 0)
            if same.any():
                n = int(np.argmax(same))
                raise OperandError(
                    f"duplicate entry ({self.rows[n]}, {self.cols[n]})")
        for a in (self.rows, self.cols, self.values):
            a.setflags(write=False)

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> tuple:
        return (self.n_rows, self.n_cols)

    def __repr__(self) -> str:
        return f"SparseOperand({self.n_rows}x{self.n_cols}, nnz={self.nnz})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseOperand):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.values, other.values))

    def entries(self) -> list:
        return [(int(r), int(c), float(v)) for r, c, v in
                zip(self.rows, self.cols, self.values)]

    @classmethod
    def from_entries(cls, n_rows: int, n_cols: int, entries) -> "SparseOperand":
        entries = list(entries)
        if not entries:
            return cls(n_rows, n_cols, [], [], [])
        r, c, v = zip(*entries)
        return cls(n_rows, n_cols, r, c, v)

    @classmethod
    def from_dense(cls, a) -> "SparseOperand":
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], r, c, a[r, c])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.values
        return out

    def to_reservoir(self, binding: str = "A") -> TupleReservoir:
        # entries are read-only, so one reservoir per binding can be shared
        cache = self.__dict__.setdefault("_reservoirs", {})
        if binding not in cache:
            cache[binding] = TupleReservoir.from_columns(
                ("row", "col"), [self.rows.tolist(), self.cols.tolist()],
                {binding: self.values.tolist()})
        return cache[binding]

    def row_lengths(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n_rows)

    def submatrix(self, mask) -> "SparseOperand":
        """Entries selected by a boolean mask, keeping global indices."""
        return SparseOperand(self.n_rows, self.n_cols, self.rows[mask], self.cols[mask],
                             self.values[mask])


class DenseOperand:
    """A 1-D or 2-D block of float64 values."""

    def __init__(self, values, shape=None):
        arr = np.array(values, dtype=np.float64)
        if shape is not None:
            shape = tuple(int(s) for s in shape)
            if arr.size != int(np.prod(shape)):
                raise OperandError(f"{arr.size} values do not fill extents {shape}")
            arr = arr.reshape(shape)
        if arr.ndim not in (1, 2):
            raise OperandError(f"dense operands are 1-D or 2-D, got {arr.ndim}-D")
        self.values = arr

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def __repr__(self) -> str:
        return f"DenseOperand(shape={self.shape})"
