"""Hybrid variants: the matrix is cut into blocks and each block gets its
own pipeline, storage and lowered loop nest."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

from ..ir.nodes import Program
from ..transform.pipeline import PipelineError, apply_pipeline, parse_pipeline
from .lower import ConcreteVariant, ConcretizeError, concretize, variant_id

PipelineChoice = Union[str, Mapping, Callable]


@dataclass(frozen=True)
class MatrixBlock:
    key: tuple  # (ii,) or (ii, jj)
    row_start: int
    col_start: int
    matrix: object  # SparseOperand in block-local coordinates
    variant: ConcreteVariant


@dataclass
class HybridVariant:
    id: str
    kernel: str
    block_shape: tuple
    choice: PipelineChoice
    variants: dict = field(default_factory=dict)  # pipeline text -> ConcreteVariant
    root: Program = None
    format: str = "BLOCKED_HYBRID"

    @property
    def pipeline(self) -> str:
        if isinstance(self.choice, str):
            return f"blocks{self.block_shape}:{self.choice}"
        if isinstance(self.choice, Mapping):
            parts = ";".join(f"{k}={v}" for k, v in sorted(self.choice.items(), key=str))
            return f"blocks{self.block_shape}:{parts}"
        return f"blocks{self.block_shape}:<per-block rule>"

    def pipeline_for(self, key: tuple, sub) -> str:
        c = self.choice
        if isinstance(c, str):
            return c
        if isinstance(c, Mapping):
            if key in c:
                return c[key]
            if "default" in c:
                return c["default"]
            raise ConcretizeError(f"no pipeline assigned to block {key}")
        return c(key, sub)

    def variant_for(self, text: str) -> ConcreteVariant:
        v = self.variants.get(text)
        if v is None:
            v = _concretize_text(self.root, text, self.kernel)
            self.variants[text] = v
        return v

    def partition(self, matrix) -> list:
        """Blocks in ascending (ii, jj) order, each with its own variant.
        Blocks without entries are kept so every block has a descriptor."""
        x = self.block_shape[0]
        y = self.block_shape[1] if len(self.block_shape) > 1 else None
        n, m = matrix.shape
        nb_r = max(1, -(-n // x))
        nb_c = max(1, -(-m // y)) if y else 1
        out = []
        for ii in range(nb_r):
            r0, r1 = ii * x, min((ii + 1) * x, n)
            for jj in range(nb_c):
                c0, c1 = (jj * y, min((jj + 1) * y, m)) if y else (0, m)
                mask = (matrix.rows >= r0) & (matrix.rows < r1) & \
                       (matrix.cols >= c0) & (matrix.cols < c1)
                sub = type(matrix)(max(r1 - r0, 0), max(c1 - c0, 0), matrix.rows[mask] - r0,
                                   matrix.cols[mask] - c0, matrix.values[mask])
                key = (ii, jj) if y else (ii,)
                variant = self.variant_for(self.pipeline_for(key, sub))
                out.append(MatrixBlock(key, r0, c0, sub, variant))
        return out

    def to_json(self) -> dict:
        return {"id": self.id, "pipeline": self.pipeline, "format": self.format,
                "block_geometry": list(self.block_shape),
                "blocks": {t: v.to_json() for t, v in sorted(self.variants.items())}}

    def describe(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _concretize_text(root: Program, text: str, kernel: str) -> ConcreteVariant:
    try:
        prog, _ = apply_pipeline(root, parse_pipeline(text))
    except PipelineError as exc:
        raise ConcretizeError(f"block pipeline {text!r}: {exc}") from exc
    return concretize(prog, text, kernel)


def blocked_concretize(root: Program, block_shape, per_block_pipelines: PipelineChoice,
                       kernel: str = "spmv") -> HybridVariant:
    """Hybrid variant over blocks of ``block_shape`` rows (and columns).

    ``per_block_pipelines`` is one pipeline for every block, a mapping from
    block keys (with an optional ``"default"`` entry) to pipelines, or a
    callable ``(key, block_matrix) -> pipeline``.  Explicitly named
    pipelines are checked right away; a callable is resolved per block.
    """
    shape = (block_shape,) if isinstance(block_shape, int) else tuple(block_shape)
    if not 1 <= len(shape) <= 2 or any(int(s) < 1 for s in shape):
        raise ConcretizeError(f"block shape must be one or two sizes >= 1, got {block_shape}")
    if kernel.startswith("trsv"):
        raise ConcretizeError("blocked execution of triangular solve would reorder "
                              "its carried dependence")
    choice = per_block_pipelines
    hv = HybridVariant("", kernel, shape, choice, root=root)
    texts = [choice] if isinstance(choice, str) else \
        list(choice.values()) if isinstance(choice, Mapping) else []
    for t in texts:
        hv.variant_for(t)
    hv.id = variant_id(hv.pipeline)
    return hv
