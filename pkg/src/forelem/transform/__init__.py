from .passes import (
    PassError, dim_reduce, encapsulate, horizontal_reduce, loop_block, loop_collapse,
    loop_interchange, materialize_dependent, materialize_independent, nstar_materialize,
    nstar_sort, orthogonalize, structure_split, undo_orthogonalize,
)
from .pipeline import (
    PASSES, Pass, Pipeline, PipelineError, PipelineSyntaxError, apply_pass, apply_pipeline,
    loop_targets, parse_pipeline, validate_pipeline,
)
from .storage import Level, MaterializedStorage, RecordField, StorageInstance

__all__ = [
    "PassError", "dim_reduce", "encapsulate", "horizontal_reduce", "loop_block",
    "loop_collapse", "loop_interchange", "materialize_dependent", "materialize_independent",
    "nstar_materialize", "nstar_sort", "orthogonalize", "structure_split",
    "undo_orthogonalize", "PASSES", "Pass", "Pipeline", "PipelineError",
    "PipelineSyntaxError", "apply_pass", "apply_pipeline", "loop_targets", "parse_pipeline",
    "validate_pipeline", "Level", "MaterializedStorage", "RecordField", "StorageInstance",
]
