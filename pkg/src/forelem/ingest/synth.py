"""Seeded synthetic matrices and triangular inputs."""
from __future__ import annotations

import numpy as np

from ..execute.operands import SparseOperand

DISTRIBUTIONS = ("uniform", "banded", "skewed-rows")


class SynthError(ValueError):
    pass


def _candidates(n: int, distribution: str, width: int) -> np.ndarray:
    cells = np.arange(n * n)
    if distribution == "banded":
        if width < 0:
            raise SynthError("band width must be >= 0")
        r, c = np.divmod(cells, n)
        return cells[np.abs(r - c) <= width]
    return cells


def synth_matrix(n: int, nnz: int, distribution: str = "uniform", seed: int = 0,
                 width: int = 1, s: float = 1.2, values: str = "integer") -> SparseOperand:
    """An n x n matrix with exactly ``nnz`` distinct positions.

    ``banded`` draws positions with ``|row - col| <= width``; ``skewed-rows``
    gives row r (in a random order) weight proportional to ``rank ** -s``.
    Values are integers 1..9 by default, or uniform in [-1, 1) for ``real``.
    """
    if distribution not in DISTRIBUTIONS:
        raise SynthError(f"unknown distribution {distribution!r}")
    if n < 0 or nnz < 0:
        raise SynthError("n and nnz must be nonnegative")
    rng = np.random.default_rng(seed)
    cells = _candidates(n, distribution, width)
    if nnz > len(cells):
        raise SynthError(f"nnz={nnz} exceeds the {len(cells)} available positions")
    p = None
    if distribution == "skewed-rows" and n:
        rank = rng.permutation(n) + 1
        row_w = rank.astype(float) ** -s
        p = np.repeat(row_w, n)
        p /= p.sum()
        if nnz > np.count_nonzero(p):
            raise SynthError("nnz exceeds the positions with nonzero weight")
    picked = rng.choice(cells, size=nnz, replace=False, p=p) if nnz else np.zeros(0, int)
    rows, cols = np.divmod(picked, max(n, 1))
    if values == "integer":
        vals = rng.integers(1, 10, size=nnz).astype(float)
    elif values == "real":
        vals = rng.uniform(-1.0, 1.0, size=nnz)
        vals[vals == 0.0] = 0.5
    else:
        raise SynthError(f"unknown value kind {values!r}")
    return SparseOperand(n, n, rows, cols, vals)


def triangular_part(matrix: SparseOperand, lower: bool = True,
                    unit_diag: bool = False) -> SparseOperand:
    """Lower (or upper) triangle of ``matrix``.

    With ``unit_diag`` every diagonal entry is set to 1, adding missing ones,
    so the result is always solvable.
    """
    n = min(matrix.shape)
    keep = matrix.rows >= matrix.cols if lower else matrix.rows <= matrix.cols
    if unit_diag:
        keep &= matrix.rows != matrix.cols
    rows, cols, vals = matrix.rows[keep], matrix.cols[keep], matrix.values[keep]
    if unit_diag:
        d = np.arange(n)
        rows, cols = np.concatenate([rows, d]), np.concatenate([cols, d])
        vals = np.concatenate([vals, np.ones(n)])
    return SparseOperand(matrix.n_rows, matrix.n_cols, rows, cols, vals)


def solvable_triangular(n: int, nnz: int, seed: int = 0, lower: bool = False,
                        distribution: str = "uniform") -> SparseOperand:
    """A triangular matrix with a nonzero diagonal, for solve tests."""
    base = synth_matrix(n, min(nnz, n * n), distribution, seed)
    tri = triangular_part(base, lower=lower)
    rng = np.random.default_rng(seed + 1)
    off = tri.rows != tri.cols
    d = np.arange(n)
    diag = rng.integers(1, 5, size=n).astype(float)
    return SparseOperand(n, n, np.concatenate([tri.rows[off], d]),
                         np.concatenate([tri.cols[off], d]),
                         np.concatenate([tri.values[off], diag]))
