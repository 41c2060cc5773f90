import io
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import M3_ENTRIES, random_matrix
from forelem.execute.operands import SparseOperand
from forelem.ingest.mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from forelem.ingest.synth import SynthError, solvable_triangular, synth_matrix, triangular_part

DATA = Path(__file__).parent / "data"


def entry_set(m):
    return {(r, c, v) for r, c, v in m.entries()}


def test_reads_m3():
    m = read_matrix_market(DATA / "m3.mtx")
    assert m.shape == (3, 3)
    assert entry_set(m) == set(M3_ENTRIES)


def test_symmetric_expansion():
    m = read_matrix_market(DATA / "sym.mtx")
    e = entry_set(m)
    assert (1, 0, -1.0) in e and (0, 1, -1.0) in e
    assert (3, 1, 0.125) in e and (1, 3, 0.125) in e
    # three diagonal entries stay single
    assert m.nnz == 3 + 2 * 2
    assert sum(1 for r, c, _ in e if r == c) == 3


def test_pattern_values_are_one():
    m = read_matrix_market(DATA / "pattern.mtx")
    assert m.shape == (3, 4)
    assert entry_set(m) == {(0, 1, 1.0), (1, 3, 1.0), (2, 0, 1.0), (2, 2, 1.0)}


def test_duplicates():
    with pytest.raises(MatrixMarketError) as info:
        read_matrix_market(DATA / "dup.mtx")
    assert info.value.line == 5 and "duplicate" in str(info.value)
    m = read_matrix_market(DATA / "dup.mtx", sum_duplicates=True)
    assert entry_set(m) == {(0, 0, 2.0), (1, 1, 2.0)}


@pytest.mark.parametrize("text, fragment", [
    ("", "empty"),
    ("%%MatrixMarket matrix coordinate complex general\n1 1 0\n", "complex"),
    ("%%MatrixMarket matrix coordinate real hermitian\n1 1 0\n", "hermitian"),
    ("%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 0\n", "skew-symmetric"),
    ("%%MatrixMarket matrix array real general\n1 1\n1\n", "coordinate"),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", "outside"),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", "announces"),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n", "bad entry"),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 3 0\n", "square"),
    ("not a header\n", "banner"),
])
def test_malformed_files(text, fragment):
    with pytest.raises(MatrixMarketError, match=fragment):
        read_matrix_market(io.StringIO(text))


def test_write_variants():
    out = io.StringIO()
    write_matrix_market(read_matrix_market(DATA / "sym.mtx"), out, symmetry="symmetric")
    text = out.getvalue()
    assert text.startswith("%%MatrixMarket matrix coordinate real symmetric\n4 4 5\n")
    assert entry_set(read_matrix_market(io.StringIO(text))) == \
        entry_set(read_matrix_market(DATA / "sym.mtx"))
    with pytest.raises(MatrixMarketError):
        write_matrix_market(SparseOperand.from_entries(2, 2, [(0, 1, 1.0)]), io.StringIO(),
                            symmetry="symmetric")
    with pytest.raises(MatrixMarketError):
        write_matrix_market(SparseOperand.from_entries(1, 1, [(0, 0, 0.5)]), io.StringIO(),
                            field="integer")
    with pytest.raises(MatrixMarketError):
        write_matrix_market(SparseOperand.from_entries(1, 1, [(0, 0, 2.0)]), io.StringIO(),
                            field="pattern")


def test_write_to_path(tmp_path):
    p = tmp_path / "m.mtx"
    m = SparseOperand.from_entries(3, 3, M3_ENTRIES)
    write_matrix_market(m, p, field="integer", comment="m3")
    assert p.read_text().splitlines()[:3] == [
        "%%MatrixMarket matrix coordinate integer general", "% m3", "3 3 5"]
    assert entry_set(read_matrix_market(p)) == set(M3_ENTRIES)


@given(st.integers(0, 2**31))
def test_round_trip_is_exact(seed):
    rng = np.random.default_rng(seed)
    a = random_matrix(rng, n_max=12, nnz_max=40)
    vals = rng.standard_normal(a.nnz) * 10.0 ** rng.integers(-300, 300, size=a.nnz)
    m = SparseOperand(a.n_rows, a.n_cols, a.rows, a.cols, vals)
    buf = io.StringIO()
    write_matrix_market(m, buf)
    back = read_matrix_market(io.StringIO(buf.getvalue()))
    assert back.shape == m.shape
    assert entry_set(back) == entry_set(m)


# synthetic matrices ------------------------------------------------------------
def test_saturation():
    m = synth_matrix(4, 16, "uniform", seed=11)
    assert {(r, c) for r, c, _ in m.entries()} == {(r, c) for r in range(4) for c in range(4)}


def test_banded_zero_is_diagonal():
    m = synth_matrix(6, 6, "banded", seed=2, width=0)
    assert sorted((r, c) for r, c, _ in m.entries()) == [(i, i) for i in range(6)]
    with pytest.raises(SynthError):
        synth_matrix(6, 7, "banded", seed=2, width=0)


def test_skewed_rows_ratio():
    m = synth_matrix(64, 256, "skewed-rows", seed=7, s=1.2)
    counts = np.bincount(m.rows, minlength=64)
    # measured with this generator: longest row 52, 49 nonempty rows
    assert counts.max() == 52 and np.count_nonzero(counts) == 49
    assert counts.max() / max(counts.min(), 1) >= 2


def test_synth_errors():
    with pytest.raises(SynthError):
        synth_matrix(3, 10)
    with pytest.raises(SynthError):
        synth_matrix(3, 2, "cubic")
    with pytest.raises(SynthError):
        synth_matrix(3, 2, "banded", width=-1)
    with pytest.raises(SynthError):
        synth_matrix(3, 2, values="complex")


@given(st.integers(0, 40), st.sampled_from(["uniform", "banded", "skewed-rows"]),
       st.integers(0, 2**31))
def test_synth_is_deterministic_and_exact(n, kind, seed):
    cap = n * n if kind != "banded" else max(0, 3 * n - 2)
    nnz = seed % (cap + 1)
    a = synth_matrix(n, nnz, kind, seed)
    b = synth_matrix(n, nnz, kind, seed)
    assert a.nnz == nnz and len({(r, c) for r, c, _ in a.entries()}) == nnz
    assert a.entries() == b.entries()
    if kind == "banded":
        assert np.all(np.abs(a.rows - a.cols) <= 1)


def test_triangular_part():
    m = SparseOperand.from_entries(3, 3, M3_ENTRIES)
    low = triangular_part(m, lower=True, unit_diag=True)
    assert entry_set(low) == {(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (2, 0, 2.0)}
    up = triangular_part(m, lower=False)
    assert entry_set(up) == {(0, 0, 4.0), (0, 2, 1.0), (1, 1, 5.0), (2, 2, 3.0)}


def test_solvable_triangular_has_full_diagonal():
    a = solvable_triangular(10, 30, seed=4)
    d = {(r, c): v for r, c, v in a.entries()}
    assert all(d.get((i, i), 0) != 0 for i in range(10))
    assert all(r <= c for r, c in d)
