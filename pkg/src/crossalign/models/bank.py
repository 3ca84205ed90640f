from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from crossalign.exceptions import ShapeError, ValidationError
from crossalign.numkit import Matrix, as_matrix

MODALITY_SEQUENCE = "sequence"
MODALITY_STRUCTURE = "structure"

UNIT_TOLERANCE = 1e-9


@dataclass(eq=False)
class EmbeddingBank:
    """Immutable, ordered collection of unit-norm pooled embeddings of one modality."""

    ids: List[str]
    vectors: Matrix
    modality: str

    def __post_init__(self) -> None:
        self.ids = list(self.ids)
        self.vectors = as_matrix(self.vectors)
        if self.vectors.ndim != 2:
            raise ShapeError(f"bank vectors must be 2-D, got {self.vectors.shape}")
        if len(self.ids) != self.vectors.shape[0]:
            raise ShapeError(f"{len(self.ids)} ids for {self.vectors.shape[0]} vectors")
        if self.size and np.any(np.abs(np.linalg.norm(self.vectors, axis=1) - 1.0) > UNIT_TOLERANCE):
            raise ValidationError("bank rows must be unit-norm")
        self.vectors.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index(self) -> Dict[str, int]:
        """id -> first row position."""
        positions: Dict[str, int] = {}
        for i, item in enumerate(self.ids):
            positions.setdefault(item, i)
        return positions


@dataclass
class RecallReport:
    k_values: List[int]
    recall_at_k: List[float]
    n_queries: int
    direction: str = field(default="seq2struct")

    def recall(self, k: int) -> float:
        return self.recall_at_k[self.k_values.index(k)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "direction": self.direction,
            "n_queries": self.n_queries,
            **{f"recall_at_{k}": r for k, r in zip(self.k_values, self.recall_at_k)},
        }


@dataclass
class SimilaritySummary:
    """Diagonal (matched pairs) versus off-diagonal cosine similarity."""

    mean_diagonal: float
    mean_off_diagonal: float
    n_queries: int
    n_corpus: int

    @property
    def margin(self) -> float:
        return self.mean_diagonal - self.mean_off_diagonal

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_diagonal": self.mean_diagonal,
            "mean_off_diagonal": self.mean_off_diagonal,
            "margin": self.margin,
            "n_queries": self.n_queries,
            "n_corpus": self.n_corpus,
        }
