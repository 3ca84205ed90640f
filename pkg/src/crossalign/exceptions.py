"""Custom exceptions for crossalign.

Every class carries the process exit code the CLI uses when it escapes a command.
"""
from __future__ import annotations


EXIT_FAILURE = 1
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_CORRUPTION = 5
EXIT_DIVERGENCE = 6


class CrossAlignError(Exception):
    """Base exception for all crossalign errors."""
    exit_code: int = EXIT_FAILURE


class ConfigurationError(CrossAlignError):
    """Raised when configuration, flags or hyperparameters are invalid."""
    exit_code = EXIT_CONFIG


class ValidationError(CrossAlignError):
    """Raised when input data breaks a precondition (empty sets, duplicate or unknown ids)."""
    exit_code = EXIT_CONFIG


class ShapeError(CrossAlignError):
    """Raised when matrix or vector dimensions do not line up."""
    exit_code = EXIT_CONFIG


class DegenerateMaskError(CrossAlignError):
    """Raised when a softmax row has every entry masked out."""
    pass


class DegenerateVectorError(CrossAlignError):
    """Raised when a vector is too close to zero to normalise."""
    pass


class NonFiniteError(CrossAlignError):
    """Raised when a numeric kernel produces NaN or Inf."""
    pass


class ContractError(CrossAlignError):
    """Raised when an API is called out of order (stale tape, mismatched optimizer state)."""
    pass


class StorageError(CrossAlignError):
    """Raised when reading or writing an artifact fails at the OS level."""
    exit_code = EXIT_IO


class FormatError(CrossAlignError):
    """Raised when a binary file has the wrong magic or version."""
    exit_code = EXIT_CORRUPTION


class CorruptionError(CrossAlignError):
    """Raised when a binary file is truncated or fails its checksum."""
    exit_code = EXIT_CORRUPTION


class DivergenceError(CrossAlignError):
    """Raised when training produces a non-finite loss or gradient."""
    exit_code = EXIT_DIVERGENCE
