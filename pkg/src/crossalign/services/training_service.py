from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from crossalign.adapters.checkpoint_adapter import Checkpoint, load_checkpoint, save_checkpoint
from crossalign.exceptions import (
    ConfigurationError,
    ContractError,
    DegenerateVectorError,
    DivergenceError,
    NonFiniteError,
    ValidationError,
)
from crossalign.losses import (
    ClipConfig,
    EmbeddingBatch,
    LossConfig,
    SiglipConfig,
    compute_loss,
    make_loss_config,
)
from crossalign.models import Batch, EpochLog, PairedRecord, RecallReport, TrainReport
from crossalign.numkit import Matrix, Rng
from crossalign.projector import (
    PROJECTION_LEARNED,
    PROJECTIONS,
    ProjectionHead,
    Tape,
    backward,
    forward_batch,
    init,
)
from crossalign.services.dataset_service import build_batch, make_batches
from crossalign.services.retrieval_service import embed_pair_banks, recall_at_k

logger = logging.getLogger(__name__)

GRAD_CHECK_FLOOR = 1e-5
GRAD_CHECK_TOLERANCE = 1e-4
BIAS_PARAMETER = "loss.bias"
VALIDATION_K = (1, 5)
DIVERGENCE_ERRORS = (NonFiniteError, DegenerateVectorError)


# ------------------------------------
# Configuration
# ------------------------------------
@dataclass(frozen=True)
class AdamConfig:
    """Adam hyperparameters; lr=0 is accepted as a frozen-parameter sanity mode."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lr) and self.lr >= 0):
            raise ConfigurationError(f"learning rate must be >= 0, got {self.lr}")
        for name in ("beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")


@dataclass
class AdamState:
    step_count: int = 0
    m: Dict[str, Matrix] = field(default_factory=dict)
    v: Dict[str, Matrix] = field(default_factory=dict)


@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig = field(default_factory=ClipConfig)
    batch_size: int = 64
    epochs: int = 200
    seed: int = 7
    dim: int = 128
    heads: int = 4
    eval_every: int = 10
    adam: AdamConfig = field(default_factory=AdamConfig)
    projection: str = PROJECTION_LEARNED

    def __post_init__(self) -> None:
        for name in ("batch_size", "dim", "heads", "eval_every"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.dim % self.heads:
            raise ConfigurationError(f"dim {self.dim} is not divisible by heads {self.heads}")
        if self.projection not in PROJECTIONS:
            raise ConfigurationError(f"unknown projection '{self.projection}'")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["loss"] = {"name": self.loss.name, **asdict(self.loss)}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TrainConfig:
        data = dict(data)
        loss = dict(data.pop("loss", {"name": "clip"}))
        data["loss"] = make_loss_config(loss.pop("name"), **loss)
        data["adam"] = AdamConfig(**data.get("adam", {}))
        field_names = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in data.items() if k in field_names})


# ------------------------------------
# Optimizer
# ------------------------------------
def adam_step(params: Dict[str, Matrix], grads: Dict[str, Matrix], state: AdamState,
              cfg: AdamConfig) -> Tuple[Dict[str, Matrix], AdamState]:
    """One bias-corrected Adam update, applied in place to the arrays in `params`."""
    if set(grads) != set(params):
        raise ContractError(f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}")
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise ContractError(f"{name}: gradient shape {grads[name].shape} != parameter shape {p.shape}")
        if name in state.m and state.m[name].shape != p.shape:
            raise ContractError(f"{name}: optimizer state shape {state.m[name].shape} != {p.shape}")

    state.step_count += 1
    bc1 = 1.0 - cfg.beta1 ** state.step_count
    bc2 = 1.0 - cfg.beta2 ** state.step_count
    for name, p in params.items():
        g = grads[name]
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)
    return params, state


# ------------------------------------
# Model: two heads + loss state
# ------------------------------------
@dataclass(eq=False)
class AlignmentModel:
    """The sequence head, the structure head and the (optionally learnable) SigLIP bias."""

    seq_head: ProjectionHead
    struct_head: ProjectionHead
    loss: LossConfig
    bias: Matrix = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self) -> None:
        if isinstance(self.loss, SiglipConfig):
            self.bias = np.array([self.loss.bias], dtype=np.float64)

    @classmethod
    def initialize(cls, cfg: TrainConfig, d_p: int, d_s: int, rng: Rng) -> AlignmentModel:
        seq_head = init(rng, d_p, cfg.dim, cfg.heads, cfg.projection)
        struct_head = init(rng, d_s, cfg.dim, cfg.heads, cfg.projection)
        return cls(seq_head, struct_head, cfg.loss)

    @property
    def learns_bias(self) -> bool:
        return isinstance(self.loss, SiglipConfig) and self.loss.bias_learnable

    def loss_config(self) -> LossConfig:
        if isinstance(self.loss, SiglipConfig):
            return self.loss.with_bias(float(self.bias[0]))
        return self.loss

    def parameters(self) -> Dict[str, Matrix]:
        params: Dict[str, Matrix] = {}
        for prefix, head in (("seq", self.seq_head), ("struct", self.struct_head)):
            params.update({f"{prefix}.{name}": getattr(head, name) for name in head.trainable_names()})
        if self.learns_bias:
            params[BIAS_PARAMETER] = self.bias
        return params

    def mark_updated(self) -> None:
        self.seq_head.mark_updated()
        self.struct_head.mark_updated()

    def loss_value(self, batch: Batch) -> float:
        p = forward_batch(self.seq_head, batch.seq, batch.seq_mask)
        s = forward_batch(self.struct_head, batch.struct, batch.struct_mask)
        return compute_loss(EmbeddingBatch(p, s), self.loss_config()).value

    def loss_and_grads(self, batch: Batch) -> Tuple[float, Dict[str, Matrix]]:
        """Loss of one batch and its gradient for every trainable parameter."""
        seq_tape, struct_tape = Tape(), Tape()
        p = forward_batch(self.seq_head, batch.seq, batch.seq_mask, seq_tape)
        s = forward_batch(self.struct_head, batch.struct, batch.struct_mask, struct_tape)
        out = compute_loss(EmbeddingBatch(p, s), self.loss_config())

        grads: Dict[str, Matrix] = {}
        for prefix, head, tape, g in (("seq", self.seq_head, seq_tape, out.grad_p),
                                      ("struct", self.struct_head, struct_tape, out.grad_s)):
            head_grads = backward(head, tape, g).as_dict()
            grads.update({f"{prefix}.{name}": head_grads[name] for name in head.trainable_names()})
        if self.learns_bias:
            grads[BIAS_PARAMETER] = np.array([out.grad_bias])
        return out.value, grads

    def to_checkpoint(self, cfg: Optional[TrainConfig] = None) -> Checkpoint:
        return Checkpoint(self.seq_head, self.struct_head, self.loss_config(), cfg.to_dict() if cfg else {})

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> AlignmentModel:
        return cls(checkpoint.seq_head, checkpoint.struct_head, checkpoint.loss)


def save_model(path: str | Path, model: AlignmentModel, cfg: Optional[TrainConfig] = None) -> None:
    save_checkpoint(path, model.to_checkpoint(cfg))


def load_model(path: str | Path) -> Tuple[AlignmentModel, Optional[TrainConfig]]:
    checkpoint = load_checkpoint(path)
    cfg = TrainConfig.from_dict(checkpoint.config) if checkpoint.config else None
    return AlignmentModel.from_checkpoint(checkpoint), cfg


# ------------------------------------
# Training loop
# ------------------------------------
def _check_widths(records: Sequence[PairedRecord], d_p: int, d_s: int, what: str) -> None:
    for r in records:
        if r.d_p != d_p or r.d_s != d_s:
            raise ConfigurationError(
                f"{what} record '{r.id}' has widths ({r.d_p}, {r.d_s}), expected ({d_p}, {d_s})"
            )


def _all_finite(grads: Dict[str, Matrix]) -> bool:
    return all(np.all(np.isfinite(g)) for g in grads.values())


def fixed_batches(records: Sequence[PairedRecord], n: int) -> List[Batch]:
    """Unshuffled batches in dataset order, for measuring the training loss."""
    return [build_batch(records[start:start + n]) for start in range(0, len(records), n)]


def training_loss(model: AlignmentModel, batches: Sequence[Batch]) -> float:
    """Mean batch loss of the current parameters over fixed batches; independent of the epoch shuffle."""
    return float(np.mean([model.loss_value(batch) for batch in batches]))


def fit(train_set: Sequence[PairedRecord], val_set: Sequence[PairedRecord], cfg: TrainConfig,
        checkpoint_path: Optional[str | Path] = None) -> Tuple[AlignmentModel, TrainReport]:
    """
    Trains both heads with Adam and returns the final model with its report.

    Initial weights come from stream 0 of the seed and batch orders from stream 1,
    so (seed, config, data) fixes the whole run.
    """
    if not train_set:
        raise ValidationError("training set is empty")
    d_p, d_s = train_set[0].d_p, train_set[0].d_s
    _check_widths(train_set, d_p, d_s, "training")
    _check_widths(val_set, d_p, d_s, "validation")

    root = Rng(cfg.seed)
    model = AlignmentModel.initialize(cfg, d_p, d_s, root.child(0))
    shuffle_rng = root.child(1)
    params = model.parameters()
    state = AdamState()
    report = TrainReport()
    loss_batches = fixed_batches(train_set, cfg.batch_size)
    if not val_set:
        logger.warning("Validation split is empty; recall is not tracked during training")

    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        stage = "optimisation"
        try:
            for index, batch in enumerate(make_batches(train_set, cfg.batch_size, shuffle_rng)):
                stage = f"batch {index}"
                value, grads = model.loss_and_grads(batch)
                if not math.isfinite(value) or not _all_finite(grads):
                    raise NonFiniteError(f"loss={value} or a gradient is not finite")
                adam_step(params, grads, state, cfg.adam)
                model.mark_updated()

            stage = "training loss"
            log = EpochLog(epoch=epoch, loss=training_loss(model, loss_batches))
            if not math.isfinite(log.loss):
                raise NonFiniteError(f"training loss is {log.loss}")
            if val_set and epoch % cfg.eval_every == 0:
                stage = "validation"
                recall = evaluate(model, val_set, VALIDATION_K)
                log.recall_at_1, log.recall_at_5 = recall.recall(1), recall.recall(5)
        except DIVERGENCE_ERRORS as e:
            logger.error(f"Divergence at epoch {epoch}, {stage} (loss={model.loss.name}, tau={model.loss.tau}): {e}")
            raise DivergenceError(f"training diverged at epoch {epoch}, {stage}: {e}") from e

        log.seconds = time.perf_counter() - started
        if log.recall_at_5 is not None:
            if report.best_recall_at_5 is None or log.recall_at_5 > report.best_recall_at_5:
                report.best_epoch, report.best_recall_at_5 = epoch, log.recall_at_5
        report.epochs.append(log)
        logger.info(
            f"epoch {epoch}/{cfg.epochs} loss={log.loss:.6f}"
            + (f" R@1={log.recall_at_1:.3f} R@5={log.recall_at_5:.3f}" if log.recall_at_5 is not None else "")
            + f" ({log.seconds:.2f}s)"
        )

    if checkpoint_path is not None:
        save_model(checkpoint_path, model, cfg)
        report.checkpoint_path = str(checkpoint_path)
    return model, report


def train(train_set: Sequence[PairedRecord], val_set: Sequence[PairedRecord], cfg: TrainConfig,
          checkpoint_path: Optional[str | Path] = None) -> TrainReport:
    _, report = fit(train_set, val_set, cfg, checkpoint_path)
    return report


def evaluate(model: AlignmentModel, records: Sequence[PairedRecord], k_values: Sequence[int],
             direction: str = "seq2struct") -> RecallReport:
    """Recall@K of `records` with the trained heads (corpus = the same records)."""
    seq_bank, struct_bank = embed_pair_banks(model.seq_head, model.struct_head, records)
    if direction == "struct2seq":
        return recall_at_k(struct_bank, seq_bank, k_values, direction=direction)
    return recall_at_k(seq_bank, struct_bank, k_values, direction=direction)


# ------------------------------------
# Gradient check
# ------------------------------------
@dataclass(frozen=True)
class GradCheckConfig:
    loss: LossConfig = field(default_factory=ClipConfig)
    n: int = 4
    t_max: int = 5
    d_p: int = 6
    d_s: int = 5
    dim: int = 16
    heads: int = 4
    step: float = 1e-5
    max_coords: Optional[int] = None
    projection: str = PROJECTION_LEARNED


@dataclass
class GradCheckReport:
    loss: str
    max_relative_error: Dict[str, float] = field(default_factory=dict)
    coordinates: Dict[str, int] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.max_relative_error.values(), default=0.0)

    def passed(self, tolerance: float = GRAD_CHECK_TOLERANCE) -> bool:
        return self.worst <= tolerance


def relative_error(analytic: float, numeric: float, floor: float = GRAD_CHECK_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(cfg: GradCheckConfig, rng: Rng) -> GradCheckReport:
    """
    Central finite differences through the full pipeline (input projection, attention,
    LayerNorm, normalisation, loss) against the analytic gradients, per parameter group.
    """
    records = []
    for i in range(cfg.n):
        t_p = int(rng.integers(1, cfg.t_max))
        t_s = int(rng.integers(1, cfg.t_max))
        records.append(PairedRecord(f"gc-{i}", rng.normal(1.0, (t_p, cfg.d_p)), rng.normal(1.0, (t_s, cfg.d_s))))
    batch = build_batch(records)

    train_cfg = TrainConfig(loss=cfg.loss, dim=cfg.dim, heads=cfg.heads, projection=cfg.projection)
    model = AlignmentModel.initialize(train_cfg, cfg.d_p, cfg.d_s, rng)
    _, analytic = model.loss_and_grads(batch)

    report = GradCheckReport(loss=cfg.loss.name)
    for name, param in model.parameters().items():
        flat = param.reshape(-1)
        coords = np.arange(flat.size)
        if cfg.max_coords is not None and flat.size > cfg.max_coords:
            coords = np.sort(rng.permutation(flat.size)[: cfg.max_coords])
        worst = 0.0
        for c in coords:
            original = flat[c]
            flat[c] = original + cfg.step
            model.mark_updated()
            plus = model.loss_value(batch)
            flat[c] = original - cfg.step
            model.mark_updated()
            minus = model.loss_value(batch)
            flat[c] = original
            model.mark_updated()
            numeric = (plus - minus) / (2 * cfg.step)
            worst = max(worst, relative_error(float(analytic[name].reshape(-1)[c]), numeric))
        report.max_relative_error[name] = worst
        report.coordinates[name] = int(coords.size)
    logger.info(f"grad_check[{cfg.loss.name}] worst relative error {report.worst:.3e}")
    return report


__all__ = [
    "AdamConfig",
    "AdamState",
    "TrainConfig",
    "AlignmentModel",
    "adam_step",
    "fit",
    "train",
    "evaluate",
    "save_model",
    "load_model",
    "save_checkpoint",
    "load_checkpoint",
    "GradCheckConfig",
    "GradCheckReport",
    "grad_check",
    "relative_error",
]
