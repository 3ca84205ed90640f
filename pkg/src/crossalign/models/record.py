from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, ClassVar, Dict, List

import numpy as np

from crossalign.exceptions import ShapeError
from crossalign.numkit import Mask, Matrix, as_matrix, ensure_finite
from crossalign.projector import TokenEmbeddings


@dataclass(eq=False)
class PairedRecord:
    """One protein: its sequence token matrix and its structure token matrix."""

    id: str
    seq_tokens: Matrix     # t_P x d_p
    struct_tokens: Matrix  # t_S x d_s

    def __post_init__(self) -> None:
        self.seq_tokens = as_matrix(self.seq_tokens)
        self.struct_tokens = as_matrix(self.struct_tokens)
        for name, m in (("seq_tokens", self.seq_tokens), ("struct_tokens", self.struct_tokens)):
            if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
                raise ShapeError(f"{self.id}: {name} must be a non-empty 2-D matrix, got {m.shape}")
            ensure_finite(m, f"{self.id} {name}")

    @property
    def t_p(self) -> int:
        return self.seq_tokens.shape[0]

    @property
    def t_s(self) -> int:
        return self.struct_tokens.shape[0]

    @property
    def d_p(self) -> int:
        return self.seq_tokens.shape[1]

    @property
    def d_s(self) -> int:
        return self.struct_tokens.shape[1]

    def sequence(self) -> TokenEmbeddings:
        return TokenEmbeddings(self.id, self.seq_tokens)

    def structure(self) -> TokenEmbeddings:
        return TokenEmbeddings(self.id, self.struct_tokens)

    def same_as(self, other: PairedRecord) -> bool:
        """Bitwise equality of id and both token matrices."""
        return (
            self.id == other.id
            and np.array_equal(self.seq_tokens, other.seq_tokens)
            and np.array_equal(self.struct_tokens, other.struct_tokens)
        )


@dataclass
class DatasetHeader:
    """PAE1 file header."""

    d_p: int
    d_s: int
    count: int
    magic: bytes = field(default=b"PAE1")
    version: int = field(default=1)

    MAGIC: ClassVar[bytes] = b"PAE1"
    VERSION: ClassVar[int] = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "magic": self.magic.decode("ascii", errors="replace"),
            "version": self.version,
            "d_p": self.d_p,
            "d_s": self.d_s,
            "count": self.count,
        }


@dataclass(eq=False)
class Batch:
    """
    A mini-batch of paired records with zero-padded token tensors.

    Row i of `seq` and row i of `struct` belong to `records[i]` (the positive pair).
    """

    records: List[PairedRecord]
    seq: Matrix
    seq_mask: Mask
    struct: Matrix
    struct_mask: Mask

    @property
    def size(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.records]
