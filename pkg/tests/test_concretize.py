import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import CHAINS, derive, m3, make_variant, random_matrix
from forelem.concretize import (
    ConcretizeError, blocked_concretize, build_storage, concretize, recognize_format,
    storage_format, variant_id,
)
from forelem.execute.operands import SparseOperand
from forelem.execute.runner import bind_variant, evaluate, run_program
from forelem.ir.kernels import builtin_kernel
from forelem.ir.nodes import Forelem, NStar, iter_loops
from forelem.ir.printer import pretty_print
from forelem.search import enumerate_variants
from forelem.validation import InvariantError, check_offsets, check_permutation, check_physical

SPMV = builtin_kernel("spmv")


def components(fmt, matrix):
    return bind_variant(make_variant("spmv", CHAINS[fmt]), matrix).physical


@pytest.mark.parametrize("fmt", list(CHAINS))
def test_named_chains_recognized(fmt):
    v = make_variant("spmv", CHAINS[fmt])
    assert v.format == fmt
    assert recognize_format(v.storage) == fmt
    assert all(storage_format(s) == fmt for s in v.storage.storages)


def test_lowered_csr_loops():
    text = pretty_print(make_variant("spmv", CHAINS["CSR"]).program)
    assert "for (k = PA_ptr[i]; k < PA_ptr[i + 1]; k++)" in text


def test_lowered_flat_loop():
    text = pretty_print(make_variant("spmv", CHAINS["COO"]).program)
    assert "for (k = 0; k < PA_len; k++)" in text
    assert text.count("for (") == 1


def test_itpack_is_column_major():
    v = make_variant("spmv", CHAINS["ELLPACK_ITPACK"])
    layouts = {c.name: c.layout for c in v.storage.components}
    assert layouts["PA_A"] == layouts["PA_col"] == "column-major"
    phys = components("ELLPACK_ITPACK", m3())
    assert phys.extents("PA_A") == [2, 3]


@pytest.mark.parametrize("fmt", list(CHAINS))
def test_lowered_program_has_no_forelem(fmt):
    v = make_variant("spmv", CHAINS[fmt])
    for _, loop in iter_loops(v.program.body):
        assert not isinstance(loop, Forelem)
        assert not isinstance(getattr(loop, "domain", None), NStar)


@pytest.mark.parametrize("text", ["", "orth(row)", "orth(row),encap", "orth(row),encap,matdep"])
def test_unfinished_programs_do_not_concretize(text):
    with pytest.raises(ConcretizeError):
        concretize(derive("spmv", text), text, "spmv")


def test_build_goldens_m3():
    a = m3()
    csr = components("CSR", a).components
    assert (csr["PA_A"], csr["PA_col"], csr["PA_ptr"]) == ([4, 1, 5, 2, 3], [0, 2, 1, 0, 2],
                                                           [0, 2, 3, 5])
    ell = components("ELLPACK_ITPACK", a)
    assert ell.logical("PA", "A") == [[4, 1], [5, 0], [2, 3]]
    assert ell.logical("PA", "col") == [[0, 2], [1, 0], [0, 2]]
    jds = components("JDS", a).components
    assert (jds["PA_perm"], jds["PA_A"], jds["PA_ptr"]) == ([0, 2, 1], [4, 2, 5, 1, 3], [0, 3, 5])


def test_descriptor_json_field_order():
    v = make_variant("spmv", CHAINS["CSR"])
    doc = json.loads(v.describe())
    assert list(doc) == ["id", "pipeline", "format", "components", "block_geometry"]
    assert doc["id"] == variant_id(CHAINS["CSR"]) and len(doc["id"]) == 12
    assert {c["kind"] for c in doc["components"]} >= {"value", "column-index", "offset"}
    assert list(doc["components"][0]) == ["name", "kind", "extents", "layout"]


def test_empty_matrix_builds_every_format():
    empty = SparseOperand.from_entries(4, 4, [])
    for fmt, text in CHAINS.items():
        v = make_variant("spmv", text)
        b = bind_variant(v, empty)
        check_physical(b.physical)
        assert evaluate(v, empty, np.ones(4)).tolist() == [0, 0, 0, 0]
    assert components("ELLPACK_ITPACK", empty).components["PA_len"] == 0


def test_degenerate_conventions():
    gap = SparseOperand.from_entries(3, 3, [(0, 0, 1.0), (2, 1, 2.0)])
    assert components("CSR", gap).components["PA_ptr"] == [0, 1, 1, 2]
    jds = components("JDS", gap).components
    assert jds["PA_perm"] == [0, 2, 1] and jds["PA_ptr"] == [0, 2]


def test_build_storage_takes_a_reservoir():
    v = make_variant("spmv", CHAINS["CSR"])
    phys = build_storage(list(v.plans), m3().to_reservoir(), {}, v.storage.extents)
    assert phys.components["PA_ptr"] == [0, 2, 3, 5]
    assert phys.components["ext_T_row"] == 3


def test_invariant_checks():
    check_offsets([0, 1, 1, 3], 3)
    with pytest.raises(InvariantError):
        check_offsets([0, 2, 1])
    with pytest.raises(InvariantError):
        check_offsets([1, 2])
    check_permutation([2, 0, 1], 3)
    with pytest.raises(InvariantError):
        check_permutation([0, 0, 1], 3)


# blocked hybrids ---------------------------------------------------------------
def test_blocked_all_csr_on_m3():
    hv = blocked_concretize(SPMV.program, (2, 2), CHAINS["CSR"])
    blocks = hv.partition(m3())
    assert [b.key for b in blocks] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert [b.matrix.nnz for b in blocks] == [2, 1, 1, 1]
    assert hv.format == "BLOCKED_HYBRID"
    x = np.array([1.0, 2.0, 3.0])
    assert evaluate(hv, m3(), x).tolist() == [7, 10, 11]


def test_blocked_empty_block_is_kept():
    a = SparseOperand.from_entries(4, 4, [(0, 0, 1.0), (3, 3, 2.0)])
    hv = blocked_concretize(SPMV.program, (2, 2), CHAINS["CSR"])
    blocks = hv.partition(a)
    assert len(blocks) == 4 and [b.matrix.nnz for b in blocks] == [1, 0, 0, 1]
    assert evaluate(hv, a, np.ones(4)).tolist() == [1, 0, 0, 2]


def test_single_block_equals_unblocked(rng):
    for _ in range(10):
        a = random_matrix(rng, n_max=10)
        x = rng.standard_normal(a.n_cols)
        hv = blocked_concretize(SPMV.program, (a.n_rows, a.n_cols), CHAINS["CSR"])
        plain = evaluate(make_variant("spmv", CHAINS["CSR"]), a, x)
        assert np.allclose(evaluate(hv, a, x), plain, rtol=1e-12, atol=0)


def test_blocked_mixed_formats():
    choice = {(0, 0): CHAINS["CSR"], "default": CHAINS["ELLPACK_ITPACK"]}
    hv = blocked_concretize(SPMV.program, (2, 2), choice)
    assert hv.format == "BLOCKED_HYBRID"
    blocks = hv.partition(m3())
    assert blocks[0].variant.format == "CSR"
    assert {b.variant.format for b in blocks[1:]} == {"ELLPACK_ITPACK"}
    assert evaluate(hv, m3(), np.array([1.0, 2.0, 3.0])).tolist() == [7, 10, 11]
    doc = hv.to_json()
    assert doc["block_geometry"] == [2, 2] and len(doc["blocks"]) == 2


def test_blocked_rule_callable():
    def rule(key, sub):
        return CHAINS["JDS"] if sub.nnz > 1 else CHAINS["COO"]
    hv = blocked_concretize(SPMV.program, 2, rule)
    got = evaluate(hv, m3(), np.array([1.0, 2.0, 3.0]))
    assert got.tolist() == [7, 10, 11]


def test_blocked_errors():
    with pytest.raises(ConcretizeError):
        blocked_concretize(SPMV.program, (0, 2), CHAINS["CSR"])
    with pytest.raises(ConcretizeError):
        blocked_concretize(SPMV.program, (2, 2), "orth(row),encap,matdep")
    with pytest.raises(ConcretizeError):
        blocked_concretize(builtin_kernel("trsv").program, 2, CHAINS["CSR"], kernel="trsv")
    hv = blocked_concretize(SPMV.program, (2, 2), {(0, 0): CHAINS["CSR"]})
    with pytest.raises(ConcretizeError):
        hv.partition(m3())


def test_blocked_pipeline_variants_are_recognized():
    v = make_variant("spmv", "orth(row),encap,block(2),matdep,split,nstar(compact),dimreduce")
    assert v.format == "BLOCKED_HYBRID" and v.storage.block_geometry == (2,)
    x = np.array([1.0, 2.0, 3.0])
    assert evaluate(v, m3(), x).tolist() == [7, 10, 11]


# properties ----------------------------------------------------------------------
@given(st.integers(0, 2**31))
def test_physical_matches_oracles(seed):
    rng = np.random.default_rng(seed)
    a = random_matrix(rng, n_max=12, nnz_max=40)
    e = a.entries()
    n_rows = max((r for r, _, _ in e), default=-1) + 1
    n_cols = max((c for _, c, _ in e), default=-1) + 1
    phys = {f: components(f, a) for f in CHAINS}
    for p in phys.values():
        check_physical(p)
    coo = phys["COO"].components
    assert (coo["PA_row"], coo["PA_col"], coo["PA_A"]) == oracles.coo(e)
    v, c, p = oracles.csr(e, n_rows)
    csr = phys["CSR"].components
    assert (csr["PA_A"], csr["PA_col"], csr["PA_ptr"]) == (v, c, p)
    v, r, p = oracles.ccs(e, n_cols)
    ccs = phys["CCS"].components
    assert (ccs["PA_A"], ccs["PA_row"], ccs["PA_ptr"]) == (v, r, p)
    w, v, c = oracles.ellpack(e, n_rows)
    ell = phys["ELLPACK_ITPACK"].components
    assert (ell["PA_len"], ell["PA_A"], ell["PA_col"]) == (w, v, c)
    perm, v, c, p = oracles.jds(e, n_rows)
    jds = phys["JDS"].components
    assert (jds["PA_perm"], jds["PA_A"], jds["PA_col"], jds["PA_ptr"]) == (perm, v, c, p)


@given(st.integers(0, 2**31))
def test_variants_agree_with_source_program(seed):
    rng = np.random.default_rng(seed)
    a = random_matrix(rng, n_max=12, nnz_max=40)
    x = rng.standard_normal(a.n_cols)
    want = run_program(SPMV, SPMV.program, a, (x,))
    for text in CHAINS.values():
        v = make_variant("spmv", text)
        assert np.allclose(evaluate(v, a, x), want, rtol=1e-10, atol=1e-12)
        # the pre-concretization program agrees too
        assert np.allclose(run_program(SPMV, derive("spmv", text), a, (x,)), want,
                           rtol=1e-10, atol=1e-12)


def test_every_enumerated_variant_handles_empty_matrices():
    for shape in [(1, 1), (3, 5)]:
        empty = SparseOperand.from_entries(*shape, [])
        for v in enumerate_variants("spmv", 6).variants:
            y = evaluate(v, empty, np.ones(shape[1]))
            assert y.shape == (shape[0],) and not y.any(), v.pipeline
