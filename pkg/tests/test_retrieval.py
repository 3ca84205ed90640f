"""
Tests for embedding banks, Recall@K, top-k queries and the CSV exports.
"""
import os
import tempfile

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from crossalign.exceptions import ShapeError, ValidationError
from crossalign.models import EmbeddingBank, PairedRecord
from crossalign.numkit import Rng, l2_normalize
from crossalign.projector import init
from crossalign.services.retrieval_service import (
    embed_bank,
    embed_pair_banks,
    export_embeddings,
    export_recall,
    export_similarity,
    read_embeddings,
    recall_at_k,
    top_k,
)


# ============================================================================
# Helpers
# ============================================================================

def random_bank(n, d, seed, prefix="x", modality="sequence"):
    return EmbeddingBank([f"{prefix}{i}" for i in range(n)], l2_normalize(Rng(seed).normal(1.0, (n, d))), modality)


def tied_banks(seed, n_query, n_corpus):
    """Banks whose scores contain exact ties: rows drawn from {e1, e2, e3, -e1}, so every score is exact."""
    rng = Rng(seed)
    palette = np.vstack([np.eye(3), -np.eye(3)[:1]])
    corpus_vectors = palette[rng.integers(0, 3, n_corpus)]
    query_vectors = palette[rng.integers(0, 3, n_query)]
    corpus_ids = [f"c{i}" for i in range(n_corpus)]
    query_ids = [corpus_ids[i] for i in rng.permutation(n_corpus)[:n_query]]
    return EmbeddingBank(query_ids, query_vectors, "sequence"), EmbeddingBank(corpus_ids, corpus_vectors, "structure")


def oracle_ranking(query, corpus):
    """Exhaustive ranking: score descending, then corpus index ascending."""
    scored = [(-float(np.dot(query, corpus.vectors[j])), j) for j in range(corpus.size)]
    return [j for _, j in sorted(scored)]


def oracle_recall(queries, corpus, k):
    hits = 0
    for i, qid in enumerate(queries.ids):
        ranking = oracle_ranking(queries.vectors[i], corpus)
        hits += corpus.ids.index(qid) in ranking[:k]
    return hits / queries.size


# ============================================================================
# Embedding
# ============================================================================

class TestEmbedBank:
    """Tests for pooling records into banks."""

    def test_rows_unit_and_ordered(self):
        head = init(Rng(0), 4, 8, 2)
        rng = Rng(1)
        records = [PairedRecord(f"r{i}", rng.normal(1.0, (2 + i, 4)), rng.normal(1.0, (2, 3))) for i in range(5)]
        bank = embed_bank(head, [r.sequence() for r in records], "sequence", chunk=2)
        assert bank.ids == [r.id for r in records]
        assert_allclose(np.linalg.norm(bank.vectors, axis=1), 1.0, atol=1e-12)

    def test_empty_input(self):
        bank = embed_bank(init(Rng(0), 4, 8, 2), [], "sequence")
        assert bank.size == 0 and bank.dim == 8

    def test_duplicated_record_gives_identical_rows(self):
        head = init(Rng(0), 4, 8, 2)
        record = PairedRecord("r", Rng(2).normal(1.0, (3, 4)), np.ones((1, 1)))
        bank = embed_bank(head, [record.sequence(), record.sequence()], "sequence")
        assert_allclose(bank.vectors[0], bank.vectors[1], atol=1e-12)

    def test_width_mismatch(self):
        record = PairedRecord("r", np.ones((3, 5)), np.ones((1, 1)))
        with pytest.raises(ShapeError):
            embed_bank(init(Rng(0), 4, 8, 2), [record.sequence()], "sequence")

    def test_pair_banks(self):
        rng = Rng(3)
        records = [PairedRecord(f"r{i}", rng.normal(1.0, (2, 4)), rng.normal(1.0, (3, 3))) for i in range(3)]
        seq, struct = embed_pair_banks(init(Rng(0), 4, 8, 2), init(Rng(1), 3, 8, 2), records)
        assert (seq.modality, struct.modality) == ("sequence", "structure")
        assert seq.ids == struct.ids


# ============================================================================
# Ranking
# ============================================================================

class TestRecallAtK:
    """Recall@K against an exhaustive oracle."""

    def test_self_retrieval(self):
        bank = random_bank(10, 6, seed=0)
        assert recall_at_k(bank, bank, [1]).recall(1) == 1.0

    def test_k_equal_to_corpus_size(self):
        queries = random_bank(10, 6, seed=1)
        corpus = random_bank(10, 6, seed=2)
        assert recall_at_k(queries, corpus, [10]).recall(10) == 1.0

    def test_monotone_in_k(self):
        report = recall_at_k(random_bank(15, 4, seed=3), random_bank(15, 4, seed=4), [1, 3, 5, 10, 15])
        assert report.recall_at_k == sorted(report.recall_at_k)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle_on_random_banks(self, seed):
        size = int(Rng(seed).integers(5, 100))
        queries = random_bank(size, 8, seed=1000 + seed)
        corpus = random_bank(size, 8, seed=2000 + seed)
        ks = [1, 2, 5, 10, size]
        report = recall_at_k(queries, corpus, ks)
        assert report.recall_at_k == [oracle_recall(queries, corpus, k) for k in ks]

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle_with_ties(self, seed):
        queries, corpus = tied_banks(seed, n_query=20, n_corpus=40)
        ks = [1, 3, 5, 40]
        report = recall_at_k(queries, corpus, ks)
        assert report.recall_at_k == [oracle_recall(queries, corpus, k) for k in ks]

    def test_tie_goes_to_lower_index(self):
        v = np.array([[1.0, 0.0]])
        corpus = EmbeddingBank(["a", "b"], np.vstack([v, v]), "structure")
        assert recall_at_k(EmbeddingBank(["a"], v, "sequence"), corpus, [1]).recall(1) == 1.0
        assert recall_at_k(EmbeddingBank(["b"], v, "sequence"), corpus, [1]).recall(1) == 0.0

    def test_scaling_scores_keeps_rankings(self):
        queries, corpus = random_bank(20, 5, seed=7), random_bank(20, 5, seed=8)
        base = recall_at_k(queries, corpus, [1, 5])
        for scale in (1 / 0.07, 1 / 0.001):
            scores = (queries.vectors @ corpus.vectors.T) * scale
            ranks = [list(np.argsort(-scores[i], kind="stable")).index(i) for i in range(20)]
            assert [np.mean(np.array(ranks) < k) for k in (1, 5)] == base.recall_at_k

    def test_missing_pair(self):
        with pytest.raises(ValidationError, match="nope"):
            recall_at_k(EmbeddingBank(["nope"], [[1.0, 0.0]], "sequence"), random_bank(3, 2, seed=1), [1])

    def test_invalid_k(self):
        bank = random_bank(3, 2, seed=1)
        with pytest.raises(ValidationError):
            recall_at_k(bank, bank, [0])


class TestTopK:
    """Top-k queries against an exhaustive oracle."""

    def test_query_in_corpus_ranks_first(self):
        corpus = random_bank(12, 6, seed=5)
        (best, score), = top_k(corpus.vectors[4], corpus, 1)
        assert best == "x4"
        assert score == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle(self, seed):
        queries, corpus = tied_banks(seed, n_query=5, n_corpus=30)
        for i in range(queries.size):
            ranked = top_k(queries.vectors[i], corpus, corpus.size)
            assert [corpus.ids.index(item) for item, _ in ranked] == oracle_ranking(queries.vectors[i], corpus)

    def test_scores_descending(self):
        corpus = random_bank(20, 4, seed=6)
        scores = [s for _, s in top_k(random_bank(1, 4, seed=9).vectors[0], corpus, 20)]
        assert scores == sorted(scores, reverse=True)
        assert all(-1 - 1e-9 <= s <= 1 + 1e-9 for s in scores)

    def test_k_clamped_to_corpus(self):
        corpus = random_bank(4, 3, seed=1)
        assert len(top_k(corpus.vectors[0], corpus, 10)) == 4

    def test_k_below_one(self):
        corpus = random_bank(4, 3, seed=1)
        with pytest.raises(ValidationError):
            top_k(corpus.vectors[0], corpus, 0)


# ============================================================================
# Exports
# ============================================================================

class TestExports:
    """CSV exports and the embeddings reader."""

    def test_similarity_identical_banks(self):
        bank = random_bank(4, 5, seed=2)
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "similarity.csv")
            summary = export_similarity(bank, bank, path)
            frame = pd.read_csv(path, index_col="id")
            with open(path) as f:
                header = f.readline().strip()
        assert header == "id,x0,x1,x2,x3"
        assert_allclose(np.diag(frame.to_numpy()), 1.0)
        assert summary.mean_diagonal == pytest.approx(1.0)
        assert summary.mean_diagonal > summary.mean_off_diagonal

    def test_similarity_orthonormal(self):
        bank = EmbeddingBank(["a", "b"], np.eye(2), "sequence")
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "similarity.csv")
            export_similarity(bank, bank, path)
            with open(path) as f:
                lines = f.read().splitlines()
        assert lines == ["id,a,b", "a,1.000000,0.000000", "b,0.000000,1.000000"]

    def test_similarity_entries_match_dot_products(self):
        queries, corpus = random_bank(6, 4, seed=3), random_bank(6, 4, seed=4, prefix="x")
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "s.csv")
            export_similarity(queries, corpus, path)
            frame = pd.read_csv(path, index_col="id")
        assert_allclose(frame.to_numpy(), queries.vectors @ corpus.vectors.T, atol=5e-7)

    def test_similarity_needs_non_empty_banks(self):
        empty = EmbeddingBank([], np.zeros((0, 2)), "sequence")
        with tempfile.TemporaryDirectory() as td:
            with pytest.raises(ValidationError):
                export_similarity(empty, empty, os.path.join(td, "s.csv"))

    def test_embeddings_round_trip(self):
        seq = random_bank(5, 7, seed=10, prefix="p", modality="sequence")
        struct = random_bank(5, 7, seed=11, prefix="p", modality="structure")
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "embeddings.csv")
            export_embeddings([seq, struct], path)
            with open(path) as f:
                lines = f.read().splitlines()
            loaded = read_embeddings(path)
        assert lines[0] == "id,modality," + ",".join(f"d{j}" for j in range(7))
        assert len(lines) == 11
        assert [b.modality for b in loaded] == ["sequence", "structure"]
        for original, back in zip((seq, struct), loaded):
            assert back.ids == original.ids
            assert_allclose(back.vectors, original.vectors, atol=1e-15, rtol=0)

    def test_recall_csv(self):
        bank = random_bank(6, 3, seed=1)
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "recall.csv")
            export_recall(recall_at_k(bank, bank, [1, 5, 10]), path)
            frame = pd.read_csv(path)
        assert list(frame.columns) == ["direction", "k", "recall", "n_queries"]
        assert frame["k"].tolist() == [1, 5, 10]
        assert_array_equal(frame["recall"], [1.0, 1.0, 1.0])
