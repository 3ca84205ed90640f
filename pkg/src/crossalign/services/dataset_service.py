from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from crossalign.exceptions import ConfigurationError, ValidationError
from crossalign.models import Batch, PairedRecord
from crossalign.numkit import Matrix, Rng, pad_sequences

logger = logging.getLogger(__name__)

SPLIT_SLACK = 1e-9


@dataclass(frozen=True)
class SynthSpec:
    """Desk-scale stand-in for encoder outputs: paired records sharing a planted linear latent."""

    n_pairs: int = 512
    latent_dim: int = 16
    d_p: int = 64
    d_s: int = 32
    t_range: Tuple[int, int] = (4, 12)
    noise_sigma: float = 0.1
    seed: int = 7

    def __post_init__(self) -> None:
        if self.n_pairs < 1:
            raise ConfigurationError(f"pairs must be at least 1, got {self.n_pairs}")
        if self.d_p < 1 or self.d_s < 1:
            raise ConfigurationError(f"widths must be positive, got d_p={self.d_p}, d_s={self.d_s}")
        if not 1 <= self.latent_dim <= min(self.d_p, self.d_s):
            raise ConfigurationError(
                f"latent_dim must lie in [1, min(d_p, d_s)={min(self.d_p, self.d_s)}], got {self.latent_dim}"
            )
        t_min, t_max = self.t_range
        if not 1 <= t_min <= t_max:
            raise ConfigurationError(f"invalid token range {self.t_range}")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ConfigurationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


# ------------------------------------
# Synthesis
# ------------------------------------
def _draw_maps(rng: Rng, spec: SynthSpec) -> Tuple[Matrix, Matrix]:
    scale = 1.0 / np.sqrt(spec.latent_dim)
    a_p = rng.normal(scale, (spec.latent_dim, spec.d_p))
    a_s = rng.normal(scale, (spec.latent_dim, spec.d_s))
    return a_p, a_s


def _synthesize(spec: SynthSpec) -> Tuple[List[PairedRecord], Matrix]:
    """
    Draw order (fixed): A_P, A_S, then per record u_i, t_P, t_S, sequence noise, structure noise.
    Every token row of record i is u_i @ A + N(0, noise_sigma^2).
    """
    rng = Rng(spec.seed)
    a_p, a_s = _draw_maps(rng, spec)
    t_min, t_max = spec.t_range

    records: List[PairedRecord] = []
    latents = np.empty((spec.n_pairs, spec.latent_dim))
    for i in range(spec.n_pairs):
        u = rng.normal(1.0, spec.latent_dim)
        latents[i] = u
        t_p = int(rng.integers(t_min, t_max))
        t_s = int(rng.integers(t_min, t_max))
        seq = np.tile(u @ a_p, (t_p, 1)) + rng.normal(spec.noise_sigma, (t_p, spec.d_p))
        struct = np.tile(u @ a_s, (t_s, 1)) + rng.normal(spec.noise_sigma, (t_s, spec.d_s))
        records.append(PairedRecord(f"syn-{i:05d}", seq, struct))
    return records, latents


def generate_synthetic(spec: SynthSpec) -> List[PairedRecord]:
    records, _ = _synthesize(spec)
    logger.info(f"Generated {len(records)} synthetic pairs (latent={spec.latent_dim}, noise={spec.noise_sigma})")
    return records


def synthetic_latents(spec: SynthSpec) -> Matrix:
    """The planted latents u_i behind `generate_synthetic(spec)`, one row per record."""
    _, latents = _synthesize(spec)
    return latents


def planted_maps(spec: SynthSpec) -> Tuple[Matrix, Matrix]:
    """The linear maps (A_P, A_S) that carry each latent into token space."""
    return _draw_maps(Rng(spec.seed), spec)


# ------------------------------------
# Splitting
# ------------------------------------
def split_sizes(n: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    """Floor every fraction; whatever the total fraction still allots goes to train."""
    if len(fractions) != 3:
        raise ValidationError(f"expected three split fractions, got {len(fractions)}")
    if any(not math.isfinite(f) or f < 0 for f in fractions) or not any(f > 0 for f in fractions):
        raise ValidationError(f"split fractions must be non-negative with at least one positive: {fractions}")
    total = sum(fractions)
    if total > 1.0 + SPLIT_SLACK:
        raise ValidationError(f"split fractions sum to {total} > 1")
    sizes = [math.floor(f * n + SPLIT_SLACK) for f in fractions]
    allotted = min(n, math.floor(total * n + SPLIT_SLACK))
    sizes[0] += allotted - sum(sizes)
    return sizes[0], sizes[1], sizes[2]


def split(records: Sequence[PairedRecord], fractions: Sequence[float], seed: int
          ) -> Tuple[List[PairedRecord], List[PairedRecord], List[PairedRecord]]:
    """Deterministic disjoint (train, val, test) split of `records`."""
    if not records:
        raise ValidationError("cannot split an empty dataset")
    n_train, n_val, n_test = split_sizes(len(records), fractions)
    order = Rng(seed).permutation(len(records))
    picked = [records[i] for i in order]
    train = picked[:n_train]
    val = picked[n_train:n_train + n_val]
    test = picked[n_train + n_val:n_train + n_val + n_test]
    return train, val, test


# ------------------------------------
# Batching
# ------------------------------------
def build_batch(records: Sequence[PairedRecord]) -> Batch:
    records = list(records)
    if not records:
        raise ValidationError("cannot build an empty batch")
    seq, seq_mask = pad_sequences([r.seq_tokens for r in records], records[0].d_p)
    struct, struct_mask = pad_sequences([r.struct_tokens for r in records], records[0].d_s)
    return Batch(records, seq, seq_mask, struct, struct_mask)


def make_batches(records: Sequence[PairedRecord], n: int, rng: Rng) -> List[Batch]:
    """One epoch of shuffled batches of size n; the final partial batch is kept."""
    if n < 1:
        raise ConfigurationError(f"batch size must be at least 1, got {n}")
    if not records:
        raise ValidationError("cannot batch an empty dataset")
    order = rng.permutation(len(records))
    return [build_batch([records[i] for i in order[start:start + n]]) for start in range(0, len(order), n)]
