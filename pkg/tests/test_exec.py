import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import CHAINS, derive, m3, make_variant, random_matrix
from forelem.concretize import HybridVariant
from forelem.execute.compiled import compile_lowered
from forelem.execute.interpreter import ExecutionError, Interpreter, Trace
from forelem.execute.operands import DenseOperand, OperandError, SparseOperand
from forelem.execute.oracle import max_rel_err, reference_oracle
from forelem.execute.runner import (
    bind_variant, build_time, evaluate, kernel_operands, run_variant,
)
from forelem.ingest.synth import solvable_triangular, synth_matrix
from forelem.search import enumerate_variants
from forelem.search.bench import kernel_inputs, kernel_matrix

TRSV_CHAINS = [
    "matdep,matdep,split@PB,nstar(padded),nstar(compact),dimreduce",
    "matdep,matdep,nstar(padded),nstar(padded)",
    "orth(row),encap,matdep,matdep,block(4),nstar(compact),dimreduce,nstar(compact)",
]


def test_spmv_m3_ones():
    v = make_variant("spmv", CHAINS["CSR"])
    res = run_variant(v, m3(), np.ones(3), repeats=3)
    assert res.output.tolist() == [5, 5, 5]
    assert res.repeats == 3 and len(res.times) == 3 and res.wall_time > 0
    assert res.checksum == 15.0


def test_spmm_zero_input():
    v = make_variant("spmm3", CHAINS["ELLPACK_ITPACK"])
    res = run_variant(v, m3(), np.zeros((3, 3)), repeats=1)
    assert not res.output.any()


def test_trsv_identity():
    eye = SparseOperand.from_dense(np.eye(4))
    b = np.array([3.0, -1.0, 0.5, 2.0])
    for text in TRSV_CHAINS:
        assert evaluate(make_variant("trsv", text), eye, b).tolist() == b.tolist()


def test_oracle_examples():
    assert reference_oracle("spmv", m3(), [1, 2, 3]).tolist() == [7, 10, 11]
    upper = SparseOperand.from_entries(2, 2, [(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0)])
    assert reference_oracle("trsv", upper, [3, 2]).tolist() == [1, 1]
    x = np.arange(6, dtype=float).reshape(3, 2)
    both = reference_oracle("spmm", m3(), x)
    cols = [reference_oracle("spmv", m3(), x[:, j]) for j in range(2)]
    assert np.array_equal(both, np.stack(cols, axis=1))


def test_oracle_limits():
    with pytest.raises(OperandError):
        reference_oracle("spmv", SparseOperand.from_entries(5000, 1, []), np.ones(1))
    with pytest.raises(OperandError):
        reference_oracle("spmv", m3(), np.ones(2))


def test_trsv_preconditions():
    v = make_variant("trsv", TRSV_CHAINS[0])
    missing = SparseOperand.from_entries(2, 2, [(0, 0, 1.0), (0, 1, 1.0)])
    with pytest.raises(OperandError, match="diagonal"):
        run_variant(v, missing, np.ones(2), repeats=1)
    lower = SparseOperand.from_entries(2, 2, [(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)])
    with pytest.raises(OperandError):
        run_variant(v, lower, np.ones(2), repeats=1)
    with pytest.raises(OperandError):
        run_variant(v, SparseOperand.from_dense(np.eye(2)), np.ones(3), repeats=1)


def test_spmv_extent_mismatch():
    with pytest.raises(OperandError):
        run_variant(make_variant("spmv", CHAINS["CSR"]), m3(), np.ones(4), repeats=1)


def test_build_time_and_golden():
    v = make_variant("spmv", CHAINS["CSR"])
    assert build_time(v, m3()) > 0
    assert bind_variant(v, m3()).physical.components["PA_ptr"] == [0, 2, 3, 5]
    assert build_time(v, SparseOperand.from_entries(3, 3, [])) > 0


def test_runs_are_deterministic():
    a = SparseOperand.from_dense(np.random.default_rng(3).standard_normal((9, 7)))
    x = np.linspace(-1, 1, 7)
    for text in CHAINS.values():
        v = make_variant("spmv", text)
        r1, r2 = run_variant(v, a, x, repeats=2), run_variant(v, a, x, repeats=2)
        assert r1.output.tobytes() == r2.output.tobytes()


def test_checksum_agrees_across_variants():
    a = SparseOperand.from_entries(4, 4, [(0, 1, 2.0), (1, 3, -1.0), (2, 0, 4.0), (3, 3, 1.0)])
    x = np.array([1.0, 2.0, 3.0, 4.0])
    sums = {run_variant(make_variant("spmv", t), a, x, repeats=1).checksum
            for t in CHAINS.values()}
    assert len(sums) == 1


def test_dense_operand_shape_check():
    assert DenseOperand(np.zeros(6), (2, 3)).shape == (2, 3)
    with pytest.raises(OperandError):
        DenseOperand(np.zeros(5), (2, 3))


def test_sparse_operand_rejects_duplicates_and_range():
    with pytest.raises(OperandError):
        SparseOperand(2, 2, [0, 0], [1, 1], [1.0, 2.0])
    with pytest.raises(OperandError):
        SparseOperand(2, 2, [2], [0], [1.0])


def test_out_of_bounds_component_read_is_reported():
    v = make_variant("spmv", CHAINS["CSR"])
    b = bind_variant(v, m3())
    bad = dict(b.physical.components, PA_ptr=[0, 2, 3, 9])
    for trace in (None, Trace()):
        with pytest.raises(ExecutionError):
            Interpreter(v.program, arrays={"B": np.ones(3), "C": np.zeros(3)},
                        sizes={"N": 3, "M": 3}, components=bad, trace=trace).run()
    neg = dict(b.physical.components, PA_col=[0, 2, -1, 0, 2])
    with pytest.raises(ExecutionError):
        Interpreter(v.program, arrays={"B": np.ones(3), "C": np.zeros(3)},
                    sizes={"N": 3, "M": 3}, components=neg).run()


def test_only_lowered_programs_compile():
    assert compile_lowered(derive("spmv", "orth(row)"), set(), {"B": (3,), "C": (3,)}) is None
    v = make_variant("spmv", CHAINS["CSR"])
    comps = bind_variant(v, m3()).physical.components
    fn = compile_lowered(v.program, set(comps), {"B": (3,), "C": (3,)})
    assert "for v_i in range" in fn.source


def _run_both(v, matrix, inputs):
    bound = bind_variant(v, matrix)
    out = []
    for trace in (None, Trace()):
        arrays, sizes = kernel_operands(bound.kernel, matrix, inputs)
        Interpreter(v.program, arrays=arrays, sizes=sizes,
                    components=bound.physical.components, trace=trace).run()
        out.append(arrays[bound.kernel.outputs[0]])
    return out


TREES = {}


@given(st.sampled_from(["spmv", "spmm3", "trsv"]), st.integers(0, 2**31))
def test_compiled_and_closure_paths_agree(kernel, seed):
    tree = TREES.get(kernel) or TREES.setdefault(kernel, enumerate_variants(kernel, 6))
    rng = np.random.default_rng(seed)
    flat = [v for v in tree.variants if not isinstance(v, HybridVariant)]
    n = int(rng.integers(1, 9))
    matrix = kernel_matrix(kernel, synth_matrix(n, int(rng.integers(0, n * n + 1)), seed=seed))
    inputs = kernel_inputs(kernel, matrix, seed)
    for i in rng.choice(len(flat), size=min(8, len(flat)), replace=False):
        fast, slow = _run_both(flat[i], matrix, inputs)
        assert fast.tobytes() == slow.tobytes()


@given(st.integers(0, 2**31))
def test_variants_match_oracle(seed):
    rng = np.random.default_rng(seed)
    a = random_matrix(rng, n_max=10, nnz_max=30)
    x = rng.standard_normal(a.n_cols)
    want = oracles.spmv(a.entries(), a.n_rows, x)
    for text in CHAINS.values():
        assert max_rel_err(evaluate(make_variant("spmv", text), a, x), want) <= 1e-10
    xm = rng.standard_normal((a.n_cols, 3))
    want_m = oracles.dense_of(a.entries(), *a.shape) @ xm
    for text in CHAINS.values():
        assert max_rel_err(evaluate(make_variant("spmm3", text), a, xm), want_m) <= 1e-10


@given(st.integers(1, 12), st.integers(0, 2**31))
def test_trsv_variants_match_back_substitution(n, seed):
    a = solvable_triangular(n, min(n * n, 3 * n), seed)
    b = np.random.default_rng(seed).standard_normal(n)
    want = oracles.back_substitution(a.to_dense(), b)
    for text in TRSV_CHAINS:
        assert max_rel_err(evaluate(make_variant("trsv", text), a, b), want) <= 1e-8
