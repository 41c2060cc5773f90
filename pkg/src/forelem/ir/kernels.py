"""Built-in sparse kernels expressed as forelem programs."""
from __future__ import annotations

from dataclasses import dataclass

from .nodes import Program
from .parser import parse_program

SPMV_SOURCE = """\
reservoir T(row, col);
data A(T);
dense B[M];
dense C[N];
forelem (t; t in T) {
  C[t.row] += B[t.col] * A(t);
}
"""

# row-at-a-time formulation with a scalar accumulator
SPMV_ROWWISE_SOURCE = """\
reservoir T(row, col);
data A(T);
dense B[M];
dense C[N];
for (i = 1; i <= N; i++) {
  int sum = 0;
  forelem (t; t in T.row[i])
    sum += B[t.col] * A[t];
  C[i] = sum;
}
"""

SPMM_SOURCE = """\
reservoir T(row, col);
data A(T);
dense B[M, K];
dense C[N, K];
forelem (t; t in T) {
  for (j = 1 .. K) {
    C[t.row, j] += A(t) * B[t.col, j];
  }
}
"""

# column-oriented substitution; the update writes b[t.row]
TRSV_SOURCE = """\
reservoir T(row, col);
data A(T);
dense b[N];
dense x[N];
for (i = {bounds}) {{
  forelem (t; t in T.(col,row)[(i, i)]) {{
    x[i] = b[i] / A(t);
  }}
  forelem (t; t in T.col[i]) {{
    b[t.row] -= A(t) * x[i];
  }}
}}
"""

# verbatim classic text, including its b[i] = b[t.row] - ... update
TRSV_CLASSIC_SOURCE = """\
reservoir T(row, col);
data A(T);
dense b[N];
dense x[N];
for (i = N; i >= 1; i--)
{
  forelem (t; t in T.(col,row)[(i, i)])
    x[i] = b[i] / A[t];
  forelem (t; t in T.col[i])
    b[i] = b[t.row] - A[t] * x[i];
}
"""


@dataclass(frozen=True)
class KernelSpec:
    kind: str  # spmv | spmm | trsv
    program: Program
    k: int = 1
    lower: bool = False
    reservoir: str = "T"
    binding: str = "A"
    inputs: tuple = ()
    outputs: tuple = ()
    # operands mutated by the kernel and copied before each run
    scratch: tuple = ()

    @property
    def name(self) -> str:
        if self.kind == "spmm":
            return f"spmm{self.k}"
        if self.kind == "trsv":
            return "trsv-lower" if self.lower else "trsv"
        return self.kind

    def sizes(self, n_rows: int, n_cols: int) -> dict:
        if self.kind == "trsv":
            return {"N": n_rows}
        out = {"N": n_rows, "M": n_cols}
        if self.kind == "spmm":
            out["K"] = self.k
        return out


def builtin_kernel(kind: str, k: int = 1, lower: bool = False) -> KernelSpec:
    """Return the untransformed program for ``spmv``, ``spmm`` or ``trsv``.

    ``spmm`` multiplies by a dense ``M x k`` matrix.  ``trsv`` solves an upper
    triangular system by descending substitution, or a lower one by
    ascending substitution when ``lower`` is set.
    """
    kind = kind.lower()
    if kind.startswith("spmm") and kind[4:].isdigit():
        k = int(kind[4:])
        kind = "spmm"
    if kind == "spmv":
        return KernelSpec("spmv", parse_program(SPMV_SOURCE, "<spmv>"),
                          inputs=("B",), outputs=("C",))
    if kind == "spmm":
        if k < 1:
            raise ValueError(f"SpMM needs at least one column, got k={k}")
        return KernelSpec("spmm", parse_program(SPMM_SOURCE, "<spmm>"), k=k,
                          inputs=("B",), outputs=("C",))
    if kind in ("trsv", "trsv-lower"):
        lower = lower or kind == "trsv-lower"
        bounds = "1 .. N" if lower else "N downto 1"
        src = TRSV_SOURCE.format(bounds=bounds)
        return KernelSpec("trsv", parse_program(src, "<trsv>"), lower=lower,
                          inputs=("b",), outputs=("x",), scratch=("b",))
    raise ValueError(f"unknown kernel {kind!r}")


def rowwise_spmv() -> Program:
    return parse_program(SPMV_ROWWISE_SOURCE, "<spmv-rowwise>")
