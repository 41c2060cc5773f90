"""Matrix Market coordinate files."""
from __future__ import annotations

import io
import os
from collections import defaultdict

import numpy as np

from ..execute.operands import SparseOperand

FIELDS = ("real", "integer", "pattern")
SYMMETRIES = ("general", "symmetric")


class MatrixMarketError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<input>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


def _open(src, mode):
    if isinstance(src, (str, os.PathLike)):
        return open(src, mode, encoding="utf-8"), str(src), True
    return src, getattr(src, "name", "<stream>"), False


def read_header(line: str, source: str = "<input>") -> tuple:
    """Return (field, symmetry) from a banner line, or raise."""
    parts = line.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket":
        raise MatrixMarketError("missing %%MatrixMarket banner", 1, source)
    obj, fmt, fld, sym = (p.lower() for p in parts[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}", 1, source)
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format {fmt!r}; only coordinate", 1, source)
    if fld not in FIELDS:
        raise MatrixMarketError(f"unsupported field {fld!r}", 1, source)
    if sym not in SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {sym!r}", 1, source)
    return fld, sym


def read_matrix_market(src, sum_duplicates: bool = False) -> SparseOperand:
    """Read a coordinate Matrix Market file into a 0-based operand.

    Symmetric files are expanded to both triangles and pattern entries get
    the value 1.0.  A repeated position is an error unless
    ``sum_duplicates`` is set.
    """
    fh, name, owned = _open(src, "r")
    try:
        lines = fh.read().splitlines()
    finally:
        if owned:
            fh.close()
    if not lines:
        raise MatrixMarketError("empty file", None, name)
    fld, sym = read_header(lines[0], name)
    n = 1
    while n < len(lines) and (not lines[n].strip() or lines[n].lstrip().startswith("%")):
        n += 1
    if n == len(lines):
        raise MatrixMarketError("missing size line", None, name)
    try:
        n_rows, n_cols, nnz = (int(x) for x in lines[n].split())
    except ValueError:
        raise MatrixMarketError(f"bad size line {lines[n].strip()!r}", n + 1, name) from None
    if min(n_rows, n_cols, nnz) < 0:
        raise MatrixMarketError("negative size", n + 1, name)
    if sym == "symmetric" and n_rows != n_cols:
        raise MatrixMarketError("symmetric matrix must be square", n + 1, name)
    want = 2 if fld == "pattern" else 3
    acc = defaultdict(float)
    seen = 0
    for ln in range(n + 1, len(lines)):
        text = lines[ln].strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != want:
            raise MatrixMarketError(f"expected {want} columns, got {len(parts)}", ln + 1, name)
        try:
            i, j = int(parts[0]), int(parts[1])
            if fld == "pattern":
                v = 1.0
            elif fld == "integer":
                v = float(int(parts[2]))
            else:
                v = float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"bad entry {text!r}", ln + 1, name) from None
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixMarketError(
                f"entry ({i}, {j}) outside declared extents {n_rows}x{n_cols}", ln + 1, name)
        seen += 1
        positions = [(i - 1, j - 1)]
        if sym == "symmetric" and i != j:
            positions.append((j - 1, i - 1))
        for pos in positions:
            if pos in acc and not sum_duplicates:
                raise MatrixMarketError(
                    f"duplicate entry ({pos[0] + 1}, {pos[1] + 1}); "
                    "pass sum_duplicates to add them", ln + 1, name)
            acc[pos] += v
    if seen != nnz:
        raise MatrixMarketError(f"header announces {nnz} entries, found {seen}", None, name)
    entries = [(r, c, v) for (r, c), v in acc.items()]
    return SparseOperand.from_entries(n_rows, n_cols, entries)


def _is_symmetric(m: SparseOperand) -> bool:
    d = {(r, c): v for r, c, v in m.entries()}
    return all(d.get((c, r)) == v for (r, c), v in d.items())


def _fmt(v: float, fld: str) -> str:
    if fld == "integer":
        return str(int(v))
    return repr(float(v))


def write_matrix_market(matrix: SparseOperand, dst, field: str = "real",
                        symmetry: str = "general", comment: str = "") -> None:
    """Write ``matrix``; symmetric output keeps the lower triangle only."""
    if field not in FIELDS or symmetry not in SYMMETRIES:
        raise MatrixMarketError(f"cannot write field={field!r} symmetry={symmetry!r}")
    vals = matrix.values
    if field == "integer" and not np.all(vals == np.round(vals)):
        raise MatrixMarketError("integer field needs integral values")
    if field == "pattern" and not np.all(vals == 1.0):
        raise MatrixMarketError("pattern field would drop values other than 1")
    entries = matrix.entries()
    if symmetry == "symmetric":
        if matrix.n_rows != matrix.n_cols or not _is_symmetric(matrix):
            raise MatrixMarketError("matrix is not symmetric")
        entries = [e for e in entries if e[0] >= e[1]]
    out = io.StringIO()
    out.write(f"%%MatrixMarket matrix coordinate {field} {symmetry}\n")
    for line in comment.splitlines():
        out.write(f"% {line}\n")
    out.write(f"{matrix.n_rows} {matrix.n_cols} {len(entries)}\n")
    for r, c, v in sorted(entries, key=lambda e: (e[1], e[0])):
        if field == "pattern":
            out.write(f"{r + 1} {c + 1}\n")
        else:
            out.write(f"{r + 1} {c + 1} {_fmt(v, field)}\n")
    fh, _, owned = _open(dst, "w")
    try:
        fh.write(out.getvalue())
    finally:
        if owned:
            fh.close()
