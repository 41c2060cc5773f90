import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from forelem.concretize import concretize  # noqa: E402
from forelem.execute.operands import SparseOperand  # noqa: E402
from forelem.ir.kernels import builtin_kernel  # noqa: E402
from forelem.transform import apply_pipeline, parse_pipeline  # noqa: E402

settings.register_profile("forelem", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("forelem")

M3_ENTRIES = [(0, 0, 4.0), (0, 2, 1.0), (1, 1, 5.0), (2, 0, 2.0), (2, 2, 3.0)]

CHAINS = {
    "COO": "matind,split",
    "CSR": "orth(row),encap,matdep,split,nstar(compact),dimreduce",
    "CCS": "orth(col),encap,matdep,split,nstar(compact),dimreduce",
    "ELLPACK_ITPACK": "orth(row),encap,matdep,split,nstar(padded)",
    "JDS": "orth(row),encap,matdep,split,nsort,interchange,nstar(compact),dimreduce",
}


def m3():
    return SparseOperand.from_entries(3, 3, M3_ENTRIES)


def derive(kernel, text):
    spec = builtin_kernel(kernel)
    prog, _ = apply_pipeline(spec.program, parse_pipeline(text))
    return prog


def make_variant(kernel, text):
    return concretize(derive(kernel, text), text, builtin_kernel(kernel).name)


def random_matrix(rng, n_max=16, nnz_max=64, square=False):
    n = int(rng.integers(1, n_max + 1))
    m = n if square else int(rng.integers(1, n_max + 1))
    nnz = int(rng.integers(0, min(nnz_max, n * m) + 1))
    flat = rng.choice(n * m, size=nnz, replace=False)
    vals = rng.integers(-9, 10, size=nnz).astype(float)
    vals[vals == 0] = 1.0
    return SparseOperand(n, m, flat // m, flat % m, vals)


@pytest.fixture
def M3():
    return m3()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
