from .mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from .synth import SynthError, solvable_triangular, synth_matrix, triangular_part

__all__ = ["MatrixMarketError", "read_matrix_market", "write_matrix_market", "SynthError",
           "solvable_triangular", "synth_matrix", "triangular_part"]
