"""
Dense float64 kernels shared by every other module.

All kernels work on the last axis so the same call serves a single vector, a batch of
rows or a padded (batch, token, feature) tensor. Inputs are never mutated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from crossalign.exceptions import (
    DegenerateMaskError,
    DegenerateVectorError,
    NonFiniteError,
    ShapeError,
    ConfigurationError,
)

Matrix = NDArray[np.float64]
Mask = NDArray[np.bool_]

LN_EPSILON = 1e-5
NORM_TOLERANCE = 1e-12
RNG_ALGORITHM = "PCG64"


def as_matrix(values: ArrayLike) -> Matrix:
    """Copies `values` into a float64 array."""
    return np.array(values, dtype=np.float64)


def ensure_finite(x: NDArray, what: str = "result") -> NDArray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return x


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product; `a` may carry leading batch axes, `b` must be 2-D."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim < 1 or b.ndim != 2:
        raise ShapeError(f"matmul expects a (...,k) and (k,m) operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return ensure_finite(a @ b, "matmul")


def softmax_row(x: ArrayLike, mask: Optional[Mask] = None) -> Matrix:
    """
    Softmax along the last axis with max-subtraction.

    Masked-out entries (mask False) get a -inf logit and come back as exact zeros.
    """
    x = np.asarray(x, dtype=np.float64)
    ensure_finite(x, "softmax logits")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeError(f"mask shape {mask.shape} does not match logits {x.shape}")
        if not np.all(mask.any(axis=-1)):
            raise DegenerateMaskError("softmax row has every entry masked")
        x = np.where(mask, x, -np.inf)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def standardize(x: Matrix, epsilon: float = LN_EPSILON) -> Tuple[Matrix, Matrix]:
    """Returns (x_hat, sigma) over the last axis with the biased (1/D) variance."""
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    sigma = np.sqrt(var + epsilon)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_hat = centered / sigma
    return ensure_finite(x_hat, "layer_norm"), sigma


def layer_norm(x: ArrayLike, gain: ArrayLike, bias: ArrayLike, epsilon: float = LN_EPSILON) -> Matrix:
    """gain * (x - mean) / sqrt(var + epsilon) + bias along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ShapeError(
            f"layer_norm lengths differ: x {x.shape[-1:]}, gain {gain.shape}, bias {bias.shape}"
        )
    x_hat, _ = standardize(x, epsilon)
    return ensure_finite(gain * x_hat + bias, "layer_norm")


def l2_normalize(x: ArrayLike, tolerance: float = NORM_TOLERANCE) -> Matrix:
    """Scales every last-axis vector to unit Euclidean norm."""
    x = np.asarray(x, dtype=np.float64)
    ensure_finite(x, "l2_normalize input")
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norm <= tolerance):
        raise DegenerateVectorError(f"cannot normalise a vector with norm <= {tolerance}")
    return x / norm


def pad_sequences(sequences: Sequence[Matrix], width: Optional[int] = None) -> Tuple[Matrix, Mask]:
    """
    Stacks variable-length (t_i, width) matrices into a zero-padded (n, t_max, width) tensor.

    The returned mask is True exactly at real-token positions.
    """
    if width is None:
        if not sequences:
            raise ShapeError("cannot infer the width of an empty sequence list")
        width = int(np.shape(sequences[0])[1])
    t_max = max((len(s) for s in sequences), default=0)
    out = np.zeros((len(sequences), t_max, width), dtype=np.float64)
    mask = np.zeros((len(sequences), t_max), dtype=bool)
    for i, seq in enumerate(sequences):
        seq = np.asarray(seq, dtype=np.float64)
        if seq.ndim != 2 or seq.shape[1] != width:
            raise ShapeError(f"sequence {i} has shape {seq.shape}, expected (t, {width})")
        out[i, : len(seq)] = seq
        mask[i, : len(seq)] = True
    return out, mask


@dataclass
class Rng:
    """
    Seeded generator: numpy's PCG64 behind a SeedSequence.

    `stream` selects an independent substream of the same seed, so training can draw
    initial weights and batch orders from separate, reproducible sequences.
    """

    seed: int
    stream: Tuple[int, ...] = ()
    algorithm: str = field(default=RNG_ALGORITHM, init=False)
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        sequence = np.random.SeedSequence(int(self.seed), spawn_key=tuple(self.stream))
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, stream: int) -> Rng:
        return Rng(self.seed, (*self.stream, stream))

    def normal(self, scale: float = 1.0, size: Sequence[int] | int = ()) -> Matrix:
        return self._generator.normal(0.0, scale, size)

    def uniform(self, low: float, high: float, size: Sequence[int] | int = ()) -> Matrix:
        return self._generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size: Sequence[int] | int | None = None):
        """Uniform integers in the closed range [low, high]."""
        return self._generator.integers(low, high, size=size, endpoint=True)

    def permutation(self, n: int) -> NDArray[np.int64]:
        return self._generator.permutation(n)
