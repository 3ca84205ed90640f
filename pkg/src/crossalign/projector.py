"""
Single-query attention pooling head.

A learnable query token attends over one modality's token embeddings with multi-head
attention; the concatenated head outputs go through an output projection, LayerNorm and
L2 normalisation, giving one unit vector per protein.

Shapes: N items, T padded tokens, D_in encoder width, D aligned width, L heads of D/L.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from crossalign.exceptions import ConfigurationError, ContractError, ShapeError, DegenerateVectorError
from crossalign.numkit import (
    NORM_TOLERANCE,
    Mask,
    Matrix,
    Rng,
    as_matrix,
    ensure_finite,
    matmul,
    softmax_row,
    standardize,
)

logger = logging.getLogger(__name__)

PROJECTION_LEARNED = "learned"
PROJECTION_IDENTITY = "identity"
PROJECTIONS = (PROJECTION_LEARNED, PROJECTION_IDENTITY)

PARAMETER_NAMES = ("input_proj", "query_token", "wq", "wk", "wv", "wo", "ln_gain", "ln_bias")
ATTENTION_WEIGHTS = ("wq", "wk", "wv", "wo")

QUERY_INIT_STD = 0.02


@dataclass(eq=False)
class TokenEmbeddings:
    """One protein's token matrix for one modality (t x D_in)."""

    id: str
    tokens: Matrix

    def __post_init__(self) -> None:
        self.tokens = as_matrix(self.tokens)
        if self.tokens.ndim != 2 or self.tokens.shape[0] < 1:
            raise ShapeError(f"{self.id}: tokens must be a non-empty (t, D_in) matrix, got {self.tokens.shape}")
        ensure_finite(self.tokens, f"{self.id} tokens")

    @property
    def count(self) -> int:
        return self.tokens.shape[0]

    @property
    def width(self) -> int:
        return self.tokens.shape[1]


@dataclass(eq=False)
class PooledEmbedding:
    vector: Matrix


@dataclass(eq=False)
class ProjectionHead:
    """
    Parameters of one modality's pooling head.

    wq/wk/wv/wo are full (D, D) matrices; head l owns columns [l*D/L, (l+1)*D/L).
    With projection="identity" they are fixed identities and never receive gradient,
    so the query token attends directly over the projected tokens.
    """

    input_proj: Matrix
    query_token: Matrix
    wq: Matrix
    wk: Matrix
    wv: Matrix
    wo: Matrix
    ln_gain: Matrix
    ln_bias: Matrix
    heads: int
    projection: str = PROJECTION_LEARNED
    revision: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        for name in PARAMETER_NAMES:
            setattr(self, name, as_matrix(getattr(self, name)))
        if self.query_token.ndim != 1:
            raise ShapeError("query_token must be a vector")
        d = self.query_token.shape[0]
        if self.heads < 1 or d % self.heads:
            raise ConfigurationError(f"dim {d} is not divisible by heads {self.heads}")
        if self.projection not in PROJECTIONS:
            raise ConfigurationError(f"unknown projection '{self.projection}'")
        if self.input_proj.ndim != 2 or self.input_proj.shape[1] != d:
            raise ShapeError(f"input_proj must be (D_in, {d}), got {self.input_proj.shape}")
        for name in ATTENTION_WEIGHTS:
            if getattr(self, name).shape != (d, d):
                raise ShapeError(f"{name} must be ({d}, {d}), got {getattr(self, name).shape}")
        for name in ("ln_gain", "ln_bias"):
            if getattr(self, name).shape != (d,):
                raise ShapeError(f"{name} must have length {d}")
        for name in PARAMETER_NAMES:
            ensure_finite(getattr(self, name), name)

    @property
    def dim(self) -> int:
        return self.query_token.shape[0]

    @property
    def d_in(self) -> int:
        return self.input_proj.shape[0]

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    def parameters(self) -> Dict[str, Matrix]:
        """Live references to the parameter arrays; in-place edits change the head."""
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def trainable_names(self) -> Tuple[str, ...]:
        if self.projection == PROJECTION_IDENTITY:
            return tuple(n for n in PARAMETER_NAMES if n not in ATTENTION_WEIGHTS)
        return PARAMETER_NAMES

    def mark_updated(self) -> None:
        """Invalidates tapes recorded before an in-place parameter update."""
        self.revision += 1

    def copy(self) -> ProjectionHead:
        return ProjectionHead(
            **{name: getattr(self, name).copy() for name in PARAMETER_NAMES},
            heads=self.heads,
            projection=self.projection,
        )


@dataclass(eq=False)
class HeadGradients:
    input_proj: Matrix
    query_token: Matrix
    wq: Matrix
    wk: Matrix
    wv: Matrix
    wo: Matrix
    ln_gain: Matrix
    ln_bias: Matrix

    @classmethod
    def zeros_like(cls, head: ProjectionHead) -> HeadGradients:
        return cls(**{name: np.zeros_like(getattr(head, name)) for name in PARAMETER_NAMES})

    def as_dict(self) -> Dict[str, Matrix]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def __iter__(self) -> Iterator[Tuple[str, Matrix]]:
        return iter(self.as_dict().items())


@dataclass(eq=False)
class Tape:
    """Activations recorded by `forward_batch` for the matching `backward` call."""

    head: Optional[ProjectionHead] = None
    revision: int = -1
    x: Optional[Matrix] = None
    h: Optional[Matrix] = None
    q: Optional[Matrix] = None
    k: Optional[Matrix] = None
    v: Optional[Matrix] = None
    attn: Optional[Matrix] = None
    pooled: Optional[Matrix] = None
    x_hat: Optional[Matrix] = None
    sigma: Optional[Matrix] = None
    norm: Optional[Matrix] = None
    out: Optional[Matrix] = None
    single: bool = False


def init(rng: Rng, d_in: int, d: int, heads: int, projection: str = PROJECTION_LEARNED) -> ProjectionHead:
    """Glorot-uniform projections, N(0, 0.02^2) query token, identity LayerNorm."""
    if d_in < 1 or d < 1:
        raise ConfigurationError(f"widths must be positive, got d_in={d_in}, d={d}")
    if heads < 1 or d % heads:
        raise ConfigurationError(f"dim {d} is not divisible by heads {heads}")

    def glorot(fan_in: int, fan_out: int) -> Matrix:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, (fan_in, fan_out))

    input_proj = glorot(d_in, d)
    query_token = rng.normal(QUERY_INIT_STD, d)
    attention = {name: glorot(d, d) for name in ATTENTION_WEIGHTS}
    if projection == PROJECTION_IDENTITY:
        attention = {name: np.eye(d) for name in ATTENTION_WEIGHTS}

    return ProjectionHead(
        input_proj=input_proj,
        query_token=query_token,
        ln_gain=np.ones(d),
        ln_bias=np.zeros(d),
        heads=heads,
        projection=projection,
        **attention,
    )


def forward_batch(head: ProjectionHead, tokens: Matrix, mask: Optional[Mask] = None,
                  tape: Optional[Tape] = None) -> Matrix:
    """
    Pools a padded (N, T, D_in) tensor into N unit vectors (N, D).

    Keys outside `mask` receive exactly zero attention.
    """
    x = np.asarray(tokens, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != head.d_in:
        raise ShapeError(f"expected tokens of shape (N, T, {head.d_in}), got {x.shape}")
    n, t, _ = x.shape
    if mask is None:
        mask = np.ones((n, t), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n, t):
        raise ShapeError(f"mask shape {mask.shape} does not match tokens {(n, t)}")

    d, heads, dh = head.dim, head.heads, head.head_dim
    h = matmul(x, head.input_proj)
    q = matmul(head.query_token, head.wq).reshape(heads, dh)
    k = matmul(h, head.wk).reshape(n, t, heads, dh)
    v = matmul(h, head.wv).reshape(n, t, heads, dh)

    # scale by sqrt(D), not sqrt(D/L)
    logits = np.einsum("ntld,ld->nlt", k, q) / np.sqrt(d)
    attn = softmax_row(logits, np.broadcast_to(mask[:, None, :], logits.shape))
    pooled = np.einsum("nlt,ntld->nld", attn, v).reshape(n, d)

    y = matmul(pooled, head.wo)
    x_hat, sigma = standardize(y)
    z = head.ln_gain * x_hat + head.ln_bias
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    if np.any(norm <= NORM_TOLERANCE):
        raise DegenerateVectorError("pooled embedding collapsed to zero after LayerNorm")
    out = z / norm

    if tape is not None:
        tape.head, tape.revision = head, head.revision
        tape.x, tape.h, tape.q, tape.k, tape.v = x, h, q, k, v
        tape.attn, tape.pooled = attn, pooled
        tape.x_hat, tape.sigma, tape.norm, tape.out = x_hat, sigma, norm, out
    return out


def forward(head: ProjectionHead, x: TokenEmbeddings, tape: Optional[Tape] = None) -> PooledEmbedding:
    """Pools one protein's tokens into its aligned unit vector."""
    if x.width != head.d_in:
        raise ShapeError(f"{x.id}: token width {x.width} does not match head input width {head.d_in}")
    out = forward_batch(head, x.tokens[None, :, :], None, tape)
    if tape is not None:
        tape.single = True
    return PooledEmbedding(vector=out[0])


def backward(head: ProjectionHead, tape: Tape, grad_out: Matrix) -> HeadGradients:
    """Gradients of a scalar loss w.r.t. every head parameter, given d loss / d output."""
    if tape is None or tape.out is None:
        raise ContractError("backward called without a recorded forward tape")
    if tape.head is not head or tape.revision != head.revision:
        raise ContractError("tape was recorded for a different head or before a parameter update")

    g = np.asarray(grad_out, dtype=np.float64)
    if tape.single and g.ndim == 1:
        g = g[None, :]
    if g.shape != tape.out.shape:
        raise ShapeError(f"grad_out shape {g.shape} does not match output {tape.out.shape}")

    n, t, d_in = tape.x.shape
    d, heads, dh = head.dim, head.heads, head.head_dim
    out, x_hat = tape.out, tape.x_hat

    # unit-norm projection
    dz = (g - out * np.sum(out * g, axis=-1, keepdims=True)) / tape.norm

    # LayerNorm
    d_gain = np.sum(dz * x_hat, axis=0)
    d_bias = np.sum(dz, axis=0)
    dxh = dz * head.ln_gain
    dy = (d * dxh - dxh.sum(axis=-1, keepdims=True)
          - x_hat * np.sum(dxh * x_hat, axis=-1, keepdims=True)) / (d * tape.sigma)

    d_wo = tape.pooled.T @ dy
    d_pooled = (dy @ head.wo.T).reshape(n, heads, dh)

    # attention pooling
    dv = np.einsum("nlt,nld->ntld", tape.attn, d_pooled)
    d_attn = np.einsum("nld,ntld->nlt", d_pooled, tape.v)
    d_logits = tape.attn * (d_attn - np.sum(tape.attn * d_attn, axis=-1, keepdims=True))
    d_logits /= np.sqrt(d)
    dq = np.einsum("nlt,ntld->ld", d_logits, tape.k).reshape(d)
    dk = np.einsum("nlt,ld->ntld", d_logits, tape.q)

    h2 = tape.h.reshape(n * t, d)
    dk2 = dk.reshape(n * t, d)
    dv2 = dv.reshape(n * t, d)
    d_wk = h2.T @ dk2
    d_wv = h2.T @ dv2
    dh = dk2 @ head.wk.T + dv2 @ head.wv.T

    grads = HeadGradients(
        input_proj=tape.x.reshape(n * t, d_in).T @ dh,
        query_token=head.wq @ dq,
        wq=np.outer(head.query_token, dq),
        wk=d_wk,
        wv=d_wv,
        wo=d_wo,
        ln_gain=d_gain,
        ln_bias=d_bias,
    )
    if head.projection == PROJECTION_IDENTITY:
        for name in ATTENTION_WEIGHTS:
            getattr(grads, name).fill(0.0)
    return grads
