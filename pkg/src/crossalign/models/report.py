from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, ClassVar, Dict, List, Optional


@dataclass
class EpochLog:
    epoch: int
    loss: float
    recall_at_1: Optional[float] = field(default=None)
    recall_at_5: Optional[float] = field(default=None)
    seconds: float = field(default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        """CSV row; wall-clock time is left out so exports stay reproducible."""
        return {
            "epoch": self.epoch,
            "loss": self.loss,
            "recall_at_1": self.recall_at_1,
            "recall_at_5": self.recall_at_5,
        }


@dataclass
class TrainReport:
    """Loss curve and validation recall of one training run."""

    epochs: List[EpochLog] = field(default_factory=list)
    checkpoint_path: Optional[str] = field(default=None)
    best_epoch: Optional[int] = field(default=None)
    best_recall_at_5: Optional[float] = field(default=None)

    @property
    def losses(self) -> List[float]:
        return [e.loss for e in self.epochs]

    @property
    def final_loss(self) -> Optional[float]:
        return self.epochs[-1].loss if self.epochs else None

    def epochs_to_best(self) -> Optional[int]:
        """Epoch of best validation Recall@5, else the epoch of minimum training loss."""
        if self.best_epoch is not None:
            return self.best_epoch
        if not self.epochs:
            return None
        return min(self.epochs, key=lambda e: e.loss).epoch


@dataclass
class AblationRow:
    axis: str
    value: str
    status: str = field(default="ok")
    final_loss: Optional[float] = field(default=None)
    recall_at_1: Optional[float] = field(default=None)
    recall_at_5: Optional[float] = field(default=None)
    epochs_to_best: Optional[int] = field(default=None)
    error: Optional[str] = field(default=None)

    STATUS_OK: ClassVar[str] = "ok"
    STATUS_FAILED: ClassVar[str] = "failed"

    def is_ok(self) -> bool:
        return self.status == self.STATUS_OK

    def to_dict(self) -> Dict[str, Any]:
        return {
            "axis": self.axis,
            "value": self.value,
            "status": self.status,
            "final_loss": self.final_loss,
            "recall_at_1": self.recall_at_1,
            "recall_at_5": self.recall_at_5,
            "epochs_to_best": self.epochs_to_best,
            "error": self.error,
        }
