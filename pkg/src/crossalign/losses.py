"""
Batch contrastive objectives over pooled embeddings.

Both losses return the value together with exact gradients w.r.t. the raw P and S
matrices; the chain through L2 normalisation lives in `projector.backward`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
from scipy.special import expit, log_expit, logsumexp

from crossalign.exceptions import ConfigurationError, NonFiniteError, ShapeError, ValidationError
from crossalign.numkit import Matrix, as_matrix, matmul

logger = logging.getLogger(__name__)

LOSS_CLIP = "clip"
LOSS_SIGLIP = "siglip"
LOSSES = (LOSS_CLIP, LOSS_SIGLIP)

DEFAULT_TAU = 0.07
DEFAULT_SIGLIP_BIAS = -10.0
UNIT_TOLERANCE = 1e-9


def _check_tau(tau: float) -> None:
    if not (math.isfinite(tau) and tau > 0):
        raise ConfigurationError(f"temperature tau must be positive, got {tau}")


@dataclass(frozen=True)
class ClipConfig:
    tau: float = DEFAULT_TAU

    def __post_init__(self) -> None:
        _check_tau(self.tau)

    @property
    def name(self) -> str:
        return LOSS_CLIP


@dataclass(frozen=True)
class SiglipConfig:
    """Sigmoid pairwise loss settings; `bias` is b, fixed unless `bias_learnable`."""

    tau: float = DEFAULT_TAU
    bias: float = DEFAULT_SIGLIP_BIAS
    bias_learnable: bool = False

    def __post_init__(self) -> None:
        _check_tau(self.tau)
        if not math.isfinite(self.bias):
            raise ConfigurationError(f"bias must be finite, got {self.bias}")

    @property
    def name(self) -> str:
        return LOSS_SIGLIP

    def with_bias(self, bias: float) -> SiglipConfig:
        return replace(self, bias=float(bias))


LossConfig = Union[ClipConfig, SiglipConfig]


@dataclass(eq=False)
class EmbeddingBatch:
    """
    Paired pooled embeddings: row i of `p` is the positive of row i of `s`.

    `check_norms=False` admits arbitrary rows, for differentiating w.r.t. raw entries.
    """

    p: Matrix
    s: Matrix
    check_norms: bool = True

    def __post_init__(self) -> None:
        self.p = as_matrix(self.p)
        self.s = as_matrix(self.s)
        if self.p.ndim != 2 or self.s.ndim != 2:
            raise ShapeError("embedding batches must be 2-D matrices")
        if self.p.shape != self.s.shape:
            raise ShapeError(f"p {self.p.shape} and s {self.s.shape} must have equal shapes")
        if self.p.shape[0] < 1:
            raise ValidationError("embedding batch is empty")
        if self.check_norms:
            for name, m in (("p", self.p), ("s", self.s)):
                if np.any(np.abs(np.linalg.norm(m, axis=1) - 1.0) > UNIT_TOLERANCE):
                    raise ValidationError(f"rows of {name} must be unit-norm")

    @property
    def size(self) -> int:
        return self.p.shape[0]


@dataclass(eq=False)
class LossOutput:
    value: float
    grad_p: Matrix
    grad_s: Matrix
    grad_bias: Optional[float] = None


def similarity_matrix(batch: EmbeddingBatch) -> Matrix:
    """All-pairs P_i . S_j; cosine similarity for unit rows."""
    return matmul(batch.p, batch.s.T)


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NonFiniteError(f"{what} loss is not finite")
    return value


def clip_loss(batch: EmbeddingBatch, cfg: ClipConfig) -> LossOutput:
    """Symmetric softmax cross-entropy over similarity rows and columns at temperature tau."""
    _check_tau(cfg.tau)
    n = batch.size
    logits = similarity_matrix(batch) / cfg.tau
    log_rows = logits - logsumexp(logits, axis=1, keepdims=True)
    log_cols = logits - logsumexp(logits, axis=0, keepdims=True)
    idx = np.arange(n)
    value = -(log_rows[idx, idx].sum() + log_cols[idx, idx].sum()) / (2 * n)

    eye = np.eye(n)
    d_logits = (np.exp(log_rows) - eye + np.exp(log_cols) - eye) / (2 * n)
    d_sim = d_logits / cfg.tau
    return LossOutput(
        value=_finite(float(value), LOSS_CLIP),
        grad_p=d_sim @ batch.s,
        grad_s=d_sim.T @ batch.p,
    )


def siglip_loss(batch: EmbeddingBatch, cfg: SiglipConfig) -> LossOutput:
    """
    Pairwise sigmoid loss: -(1/N) sum_ij log sigmoid(y_ij (P_i.S_j / tau - b)).

    Normalised by N (not N^2), so the magnitude grows with the batch size.
    """
    _check_tau(cfg.tau)
    n = batch.size
    labels = 2.0 * np.eye(n) - 1.0
    z = labels * (similarity_matrix(batch) / cfg.tau - cfg.bias)
    value = -log_expit(z).sum() / n

    d_z = -expit(-z) / n
    d_sim = d_z * labels / cfg.tau
    grad_bias = float(-(d_z * labels).sum()) if cfg.bias_learnable else None
    return LossOutput(
        value=_finite(float(value), LOSS_SIGLIP),
        grad_p=d_sim @ batch.s,
        grad_s=d_sim.T @ batch.p,
        grad_bias=grad_bias,
    )


def compute_loss(batch: EmbeddingBatch, cfg: LossConfig) -> LossOutput:
    if isinstance(cfg, SiglipConfig):
        return siglip_loss(batch, cfg)
    return clip_loss(batch, cfg)


def make_loss_config(name: str, tau: float = DEFAULT_TAU, bias: float = DEFAULT_SIGLIP_BIAS,
                     bias_learnable: bool = False) -> LossConfig:
    name = name.strip().lower()
    if name == LOSS_CLIP:
        return ClipConfig(tau=tau)
    if name == LOSS_SIGLIP:
        return SiglipConfig(tau=tau, bias=bias, bias_learnable=bias_learnable)
    raise ConfigurationError(f"unknown loss '{name}', expected one of {', '.join(LOSSES)}")
