from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from crossalign.exceptions import ShapeError, StorageError, ValidationError
from crossalign.models import (
    MODALITY_SEQUENCE,
    MODALITY_STRUCTURE,
    EmbeddingBank,
    PairedRecord,
    RecallReport,
    SimilaritySummary,
)
from crossalign.numkit import Matrix, pad_sequences
from crossalign.projector import ProjectionHead, TokenEmbeddings, forward_batch

logger = logging.getLogger(__name__)

DIRECTION_SEQ2STRUCT = "seq2struct"
DIRECTION_STRUCT2SEQ = "struct2seq"
DIRECTIONS = (DIRECTION_SEQ2STRUCT, DIRECTION_STRUCT2SEQ)

EMBED_CHUNK = 256
SIMILARITY_FORMAT = "%.6f"
EMBEDDING_FORMAT = "%.17g"


# ------------------------------------
# Embedding
# ------------------------------------
def embed_bank(head: ProjectionHead, items: Sequence[TokenEmbeddings], modality: str,
               chunk: int = EMBED_CHUNK) -> EmbeddingBank:
    """Pools every item with `head`, preserving order."""
    if not items:
        return EmbeddingBank([], np.zeros((0, head.dim)), modality)
    vectors: List[Matrix] = []
    for start in range(0, len(items), chunk):
        part = items[start:start + chunk]
        tokens, mask = pad_sequences([item.tokens for item in part], head.d_in)
        vectors.append(forward_batch(head, tokens, mask))
    return EmbeddingBank([item.id for item in items], np.concatenate(vectors), modality)


def embed_pair_banks(seq_head: ProjectionHead, struct_head: ProjectionHead,
                     records: Sequence[PairedRecord]) -> Tuple[EmbeddingBank, EmbeddingBank]:
    seq_bank = embed_bank(seq_head, [r.sequence() for r in records], MODALITY_SEQUENCE)
    struct_bank = embed_bank(struct_head, [r.structure() for r in records], MODALITY_STRUCTURE)
    return seq_bank, struct_bank


# ------------------------------------
# Ranking
# ------------------------------------
def _check_dims(queries: EmbeddingBank, corpus: EmbeddingBank) -> None:
    if queries.size and corpus.size and queries.dim != corpus.dim:
        raise ShapeError(f"query width {queries.dim} does not match corpus width {corpus.dim}")


def target_ranks(queries: EmbeddingBank, corpus: EmbeddingBank) -> np.ndarray:
    """
    0-based rank of each query's matching corpus row.

    Rows ranked by dot product descending; equal scores keep ascending corpus order.
    """
    _check_dims(queries, corpus)
    positions = corpus.index()
    missing = [q for q in queries.ids if q not in positions]
    if missing:
        raise ValidationError(f"query id '{missing[0]}' has no pair in the corpus")
    targets = np.array([positions[q] for q in queries.ids], dtype=np.int64)

    scores = queries.vectors @ corpus.vectors.T
    target_scores = scores[np.arange(queries.size), targets][:, None]
    columns = np.arange(corpus.size)[None, :]
    ahead = (scores > target_scores) | ((scores == target_scores) & (columns < targets[:, None]))
    return ahead.sum(axis=1)


def recall_at_k(queries: EmbeddingBank, corpus: EmbeddingBank, k_values: Sequence[int],
                direction: str = DIRECTION_SEQ2STRUCT) -> RecallReport:
    """Fraction of queries whose same-id corpus row is among the top k, for every k."""
    k_values = [int(k) for k in k_values]
    if not k_values:
        raise ValidationError("at least one k is required")
    if any(k < 1 for k in k_values):
        raise ValidationError(f"k must be at least 1, got {k_values}")
    if queries.size == 0:
        raise ValidationError("query bank is empty")
    ranks = target_ranks(queries, corpus)
    recalls = [float(np.mean(ranks < k)) for k in k_values]
    return RecallReport(k_values, recalls, queries.size, direction)


def top_k(query: Matrix, corpus: EmbeddingBank, k: int) -> List[Tuple[str, float]]:
    """The k best corpus rows for one query vector as (id, score), best first."""
    if k < 1:
        raise ValidationError(f"k must be at least 1, got {k}")
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1:
        raise ShapeError(f"query must be a vector, got shape {query.shape}")
    if corpus.size == 0:
        return []
    if query.shape[0] != corpus.dim:
        raise ShapeError(f"query width {query.shape[0]} does not match corpus width {corpus.dim}")
    if k > corpus.size:
        logger.warning(f"k={k} exceeds corpus size {corpus.size}; clamping")
        k = corpus.size
    scores = corpus.vectors @ query
    order = np.argsort(-scores, kind="stable")[:k]
    return [(corpus.ids[i], float(scores[i])) for i in order]


# ------------------------------------
# Exports
# ------------------------------------
def _write_csv(frame: pd.DataFrame, path: Union[str, Path], **kwargs) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, lineterminator="\n", **kwargs)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {path} ({len(frame)} rows)")


def _read_csv(path: Union[str, Path], **kwargs) -> pd.DataFrame:
    path = Path(path)
    try:
        return pd.read_csv(path, **kwargs)
    except FileNotFoundError as e:
        raise StorageError(f"file not found: {path}") from e
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}") from e


def summarize_similarity(queries: EmbeddingBank, corpus: EmbeddingBank) -> SimilaritySummary:
    """Mean similarity of same-id pairs versus all other pairs."""
    if queries.size == 0 or corpus.size == 0:
        raise ValidationError("similarity needs non-empty banks")
    _check_dims(queries, corpus)
    sim = queries.vectors @ corpus.vectors.T
    matched = np.array(queries.ids, dtype=object)[:, None] == np.array(corpus.ids, dtype=object)[None, :]
    if not matched.any():
        logger.warning("No query id appears in the corpus; mean diagonal is undefined")
    mean_diag = float(sim[matched].mean()) if matched.any() else float("nan")
    mean_off = float(sim[~matched].mean()) if (~matched).any() else float("nan")
    return SimilaritySummary(mean_diag, mean_off, queries.size, corpus.size)


def export_similarity(queries: EmbeddingBank, corpus: EmbeddingBank, path: Union[str, Path]) -> SimilaritySummary:
    """All-pairs cosine similarity as CSV (rows: query ids, columns: corpus ids)."""
    summary = summarize_similarity(queries, corpus)
    frame = pd.DataFrame(
        queries.vectors @ corpus.vectors.T,
        index=pd.Index(queries.ids, name="id"),
        columns=corpus.ids,
    )
    _write_csv(frame, path, float_format=SIMILARITY_FORMAT)
    logger.info(
        f"similarity: mean diagonal {summary.mean_diagonal:.6f}, "
        f"mean off-diagonal {summary.mean_off_diagonal:.6f}, margin {summary.margin:.6f}"
    )
    return summary


def export_embeddings(banks: Union[EmbeddingBank, Sequence[EmbeddingBank]], path: Union[str, Path]) -> None:
    """Writes one row per vector: id, modality, d0 .. d{D-1}, at 17 significant digits."""
    if isinstance(banks, EmbeddingBank):
        banks = [banks]
    dims = {b.dim for b in banks if b.size}
    if len(dims) > 1:
        raise ShapeError(f"banks of different widths cannot share a file: {sorted(dims)}")
    dim = dims.pop() if dims else (banks[0].dim if banks else 0)
    columns = [f"d{j}" for j in range(dim)]
    frames = [
        pd.DataFrame(b.vectors, columns=columns).assign(id=b.ids, modality=b.modality)
        for b in banks
    ]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)
    frame = frame.reindex(columns=["id", "modality", *columns])
    _write_csv(frame, path, index=False, float_format=EMBEDDING_FORMAT)


def read_embeddings(path: Union[str, Path]) -> List[EmbeddingBank]:
    """Parses an embeddings CSV back into one bank per modality, in file order."""
    frame = _read_csv(path, dtype={"id": str, "modality": str}, float_precision="round_trip")
    if list(frame.columns[:2]) != ["id", "modality"]:
        raise ValidationError(f"{path}: expected leading columns id,modality")
    coords = [c for c in frame.columns[2:]]
    banks: Dict[str, EmbeddingBank] = {}
    for modality in dict.fromkeys(frame["modality"]):
        part = frame[frame["modality"] == modality]
        banks[modality] = EmbeddingBank(
            list(part["id"]), part[coords].to_numpy(dtype=np.float64), modality
        )
    return list(banks.values())


def export_recall(report: RecallReport, path: Union[str, Path]) -> None:
    frame = pd.DataFrame({
        "direction": report.direction,
        "k": report.k_values,
        "recall": report.recall_at_k,
        "n_queries": report.n_queries,
    })
    _write_csv(frame, path, index=False)


def export_similarity_summary(summary: SimilaritySummary, path: Union[str, Path]) -> None:
    _write_csv(pd.DataFrame([summary.to_dict()]), path, index=False)


def export_loss_curve(epochs, path: Union[str, Path]) -> None:
    """Loss curve CSV: epoch, loss, recall_at_1, recall_at_5 (recall blank when not evaluated)."""
    columns = ["epoch", "loss", "recall_at_1", "recall_at_5"]
    frame = pd.DataFrame([e.to_dict() for e in epochs], columns=columns)
    _write_csv(frame, path, index=False, float_format=EMBEDDING_FORMAT)
