"""Estimator-style wrappers: fit a variant to a matrix, or a selector to timings."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .concretize.lower import concretize
from .execute.operands import SparseOperand
from .execute.runner import bind_variant, kernel_operands
from .ir.kernels import builtin_kernel
from .search.coverage import TimingTable, coverage, select_kernel
from .transform.pipeline import apply_pipeline


class SparseKernelEstimator(BaseEstimator):
    """Derives a variant from ``passes`` and builds its storage in ``fit``.

    ``predict(x)`` then applies the kernel of the fitted matrix to ``x``.
    """

    def __init__(self, kernel: str = "spmv", passes: str = ""):
        self.kernel = kernel
        self.passes = passes

    def fit(self, X: SparseOperand, y=None):
        if not isinstance(X, SparseOperand):
            raise TypeError("fit expects a SparseOperand")
        spec = builtin_kernel(self.kernel)
        prog, _ = apply_pipeline(spec.program, self.passes)
        self.variant_ = concretize(prog, self.passes, spec.name)
        self.format_ = self.variant_.format
        self.bound_ = bind_variant(self.variant_, X, spec)
        self.build_seconds_ = self.bound_.build_seconds
        self.matrix_ = X
        self.n_features_in_ = X.n_cols
        return self

    def predict(self, x) -> np.ndarray:
        if not hasattr(self, "bound_"):
            raise NotFittedError("call fit with a matrix first")
        spec = self.bound_.kernel
        arrays, sizes = kernel_operands(spec, self.matrix_, (np.asarray(x, dtype=float),))
        self.bound_.compute(arrays, sizes)
        return arrays[spec.outputs[0]]


class CoverageSelector(BaseEstimator):
    """Picks the routines that stay within t% on a seeded sample of k matrices."""

    def __init__(self, k: int = 4, t_percent: float = 2.0, seed: int = 0):
        self.k = k
        self.t_percent = t_percent
        self.seed = seed

    def fit(self, X: TimingTable, y=None):
        self.selection_ = select_kernel(X, self.k, self.t_percent, self.seed)
        self.report_ = coverage(X, self.t_percent)
        return self

    def predict(self, X=None) -> tuple:
        if not hasattr(self, "selection_"):
            raise NotFittedError("call fit with a timing table first")
        return self.selection_.routines
