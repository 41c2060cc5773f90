from .bench import BenchRow, bench, load_matrices, rows_csv, synthetic_corpus, timing_table
from .coverage import (
    CoverageReport, Selection, TimingError, TimingTable, coverage, coverage_curve, curve_csv,
    select_kernel, top_group,
)
from .enumerate import TreeNode, VariantTree, enumerate_variants, moves

__all__ = [
    "BenchRow", "bench", "load_matrices", "rows_csv", "synthetic_corpus", "timing_table",
    "CoverageReport", "Selection", "TimingError", "TimingTable", "coverage", "coverage_curve",
    "curve_csv", "select_kernel", "top_group", "TreeNode", "VariantTree",
    "enumerate_variants", "moves",
]
