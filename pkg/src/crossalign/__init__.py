"""crossalign - contrastive alignment of protein sequence and structure embeddings"""

__version__ = "0.1.0"

from .exceptions import (
    CrossAlignError,
    ConfigurationError,
    ValidationError,
    ShapeError,
    StorageError,
    FormatError,
    CorruptionError,
    DivergenceError,
)

__all__ = [
    "__version__",
    "CrossAlignError",
    "ConfigurationError",
    "ValidationError",
    "ShapeError",
    "StorageError",
    "FormatError",
    "CorruptionError",
    "DivergenceError",
]
