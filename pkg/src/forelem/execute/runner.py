"""Running kernels: operand setup, timing, and result records."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from ..concretize.blocked import HybridVariant
from ..concretize.build import timed_build
from ..concretize.lower import ConcreteVariant
from ..ir.kernels import KernelSpec, builtin_kernel
from ..ir.nodes import Program
from .interpreter import Interpreter, Trace, bind_reservoirs, execute
from .operands import DenseOperand, OperandError, SparseOperand
from .oracle import check_triangular


@dataclass
class RunResult:
    outputs: dict
    wall_time: float
    repeats: int
    checksum: float
    times: tuple = ()

    @property
    def output(self) -> np.ndarray:
        return next(iter(self.outputs.values()))


def _values(x):
    return x.values if isinstance(x, DenseOperand) else np.asarray(x, dtype=np.float64)


def kernel_operands(kernel: KernelSpec, matrix: SparseOperand, inputs) -> tuple:
    """Return (arrays, sizes) for one run; outputs start at zero."""
    if len(inputs) != len(kernel.inputs):
        raise OperandError(f"{kernel.name} takes {len(kernel.inputs)} dense input(s)")
    x = _values(inputs[0])
    n, m = matrix.shape
    if kernel.kind == "spmv":
        if x.size != m:
            raise OperandError(f"input vector has {x.size} entries, need {m}")
        return {"B": x.astype(np.float64).ravel().copy(), "C": np.zeros(n)}, \
            kernel.sizes(n, m)
    if kernel.kind == "spmm":
        if x.shape != (m, kernel.k):
            raise OperandError(f"input block has shape {x.shape}, need ({m}, {kernel.k})")
        return {"B": x.astype(np.float64).copy(), "C": np.zeros((n, kernel.k))}, \
            kernel.sizes(n, m)
    check_triangular(matrix, kernel.lower)
    if x.size != n:
        raise OperandError(f"right-hand side has {x.size} entries, need {n}")
    return {"b": x.astype(np.float64).ravel().copy(), "x": np.zeros(n)}, kernel.sizes(n, m)


def run_program(kernel: KernelSpec, program: Program, matrix: SparseOperand, inputs,
                trace: Trace | None = None) -> np.ndarray:
    """Interpret a source or transformed program and return its output."""
    arrays, sizes = kernel_operands(kernel, matrix, inputs)
    res = {kernel.reservoir: matrix.to_reservoir(kernel.binding)}
    execute(program, res, arrays, sizes, trace=trace)
    return arrays[kernel.outputs[0]]


def checksum(outputs: dict) -> float:
    """Order-independent sum over all output values."""
    return float(sum(float(np.sum(np.sort(v.ravel()))) for v in outputs.values()))


def time_runs(fn, repeats: int) -> tuple:
    """One warmup, then ``repeats`` timed calls; returns (median, times, last)."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    fn()
    times, last = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        last = fn()
        times.append(max(time.perf_counter() - t0, 1e-9))
    return statistics.median(times), tuple(times), last


@dataclass
class BoundVariant:
    """A variant with its physical storage built for one matrix."""
    variant: ConcreteVariant
    kernel: KernelSpec
    physical: object  # PhysicalStorage
    build_seconds: float

    def compute(self, arrays: dict, sizes: dict) -> dict:
        Interpreter(self.variant.program, arrays=arrays, sizes=sizes,
                    components=self.physical.components).run()
        return arrays


def variant_kernel(variant) -> KernelSpec:
    if not variant.kernel:
        raise OperandError("variant does not name its kernel")
    return builtin_kernel(variant.kernel)


def bind_variant(variant: ConcreteVariant, matrix: SparseOperand,
                 kernel: KernelSpec | None = None) -> BoundVariant:
    """Build the variant's physical storage for ``matrix`` (timed)."""
    kernel = kernel or variant_kernel(variant)
    res = {kernel.reservoir: matrix.to_reservoir(kernel.binding)}
    if variant.source is not None:
        res = bind_reservoirs(variant.source, res)
    sizes = kernel.sizes(*matrix.shape)
    phys, seconds = timed_build(list(variant.plans), res, sizes, variant.storage.extents)
    return BoundVariant(variant, kernel, phys, seconds)


def build_time(variant, matrix: SparseOperand) -> float:
    """Wall time of building the variant's storage for ``matrix``."""
    if isinstance(variant, HybridVariant):
        return sum(bind_variant(b.variant, b.matrix, variant_kernel(variant)).build_seconds
                   for b in variant.partition(matrix))
    return bind_variant(variant, matrix).build_seconds


def _hybrid_runner(variant: HybridVariant, matrix: SparseOperand, inputs):
    kernel = variant_kernel(variant)
    blocks = []
    build = 0.0
    for blk in variant.partition(matrix):
        bound = bind_variant(blk.variant, blk.matrix, kernel)
        build += bound.build_seconds
        blocks.append((blk, bound))
    arrays, sizes = kernel_operands(kernel, matrix, inputs)
    x = arrays["B"]

    def run():
        out = np.zeros_like(arrays["C"])
        for blk, bound in blocks:
            n, m = blk.matrix.shape
            local = {"B": x[blk.col_start:blk.col_start + m].copy(),
                     "C": np.zeros((n,) + out.shape[1:])}
            bound.compute(local, kernel.sizes(n, m))
            out[blk.row_start:blk.row_start + n] += local["C"]
        return {"C": out}
    return run, build


def evaluate(variant, matrix: SparseOperand, *inputs) -> np.ndarray:
    """One untimed run; returns the primary output."""
    if isinstance(variant, HybridVariant):
        run, _ = _hybrid_runner(variant, matrix, inputs)
        return run()["C"]
    bound = bind_variant(variant, matrix)
    arrays, sizes = kernel_operands(bound.kernel, matrix, inputs)
    bound.compute(arrays, sizes)
    return arrays[bound.kernel.outputs[0]]


def run_variant(variant, matrix: SparseOperand, *inputs, repeats: int = 10) -> RunResult:
    """Time the lowered loop nest over freshly built storage.

    Storage is built once before timing; every timed call starts from zeroed
    outputs and fresh copies of scratch operands.
    """
    if isinstance(variant, HybridVariant):
        run, _ = _hybrid_runner(variant, matrix, inputs)
    else:
        bound = bind_variant(variant, matrix)
        arrays, sizes = kernel_operands(bound.kernel, matrix, inputs)

        def run():
            fresh = {k: v.copy() for k, v in arrays.items()}
            bound.compute(fresh, sizes)
            return {k: fresh[k] for k in bound.kernel.outputs}
    median, times, outputs = time_runs(run, repeats)
    return RunResult(outputs, median, repeats, checksum(outputs), times)
