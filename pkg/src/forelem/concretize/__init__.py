from .blocked import HybridVariant, blocked_concretize
from .build import BuildError, PhysicalStorage, build_storage, timed_build
from .formats import FORMATS, recognize_format, storage_format, storage_shape
from .layout import ComponentSpec, StorageLayout
from .lower import ConcreteVariant, ConcretizeError, StorageDescriptor, concretize, lower, variant_id

__all__ = [
    "HybridVariant", "blocked_concretize", "BuildError", "PhysicalStorage", "build_storage",
    "timed_build", "FORMATS", "recognize_format", "storage_format", "storage_shape",
    "ComponentSpec", "StorageLayout", "ConcreteVariant", "ConcretizeError",
    "StorageDescriptor", "concretize", "lower", "variant_id",
]
