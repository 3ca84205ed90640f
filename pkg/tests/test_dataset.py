"""
Tests for synthetic data generation, splitting and batching.
"""
from collections import Counter

import numpy as np
import pytest

from crossalign.exceptions import ConfigurationError, ValidationError
from crossalign.models import PairedRecord
from crossalign.numkit import Rng
from crossalign.services.dataset_service import (
    SynthSpec,
    build_batch,
    generate_synthetic,
    make_batches,
    planted_maps,
    split,
    split_sizes,
    synthetic_latents,
)


def make_records(n, d_p=3, d_s=2, seed=0):
    rng = Rng(seed)
    return [
        PairedRecord(f"r{i}", rng.normal(1.0, (1 + i % 3, d_p)), rng.normal(1.0, (2 + i % 2, d_s)))
        for i in range(n)
    ]


class TestSynthetic:
    """Tests for the planted-latent generator."""

    def test_shapes_and_ids(self):
        spec = SynthSpec(n_pairs=20, latent_dim=4, d_p=6, d_s=5, t_range=(2, 3), seed=1)
        records = generate_synthetic(spec)
        assert len(records) == 20
        assert records[0].id == "syn-00000"
        assert len({r.id for r in records}) == 20
        for r in records:
            assert r.d_p == 6 and r.d_s == 5
            assert 2 <= r.t_p <= 3 and 2 <= r.t_s <= 3

    def test_same_seed_identical(self):
        spec = SynthSpec(n_pairs=10, latent_dim=4, d_p=6, d_s=5, seed=3)
        a, b = generate_synthetic(spec), generate_synthetic(spec)
        assert all(x.same_as(y) for x, y in zip(a, b))

    def test_different_seed_differs(self):
        a = generate_synthetic(SynthSpec(n_pairs=3, latent_dim=2, d_p=4, d_s=4, seed=1))
        b = generate_synthetic(SynthSpec(n_pairs=3, latent_dim=2, d_p=4, d_s=4, seed=2))
        assert not a[0].same_as(b[0])

    def test_noiseless_tokens_are_the_latent_image(self):
        spec = SynthSpec(n_pairs=6, latent_dim=3, d_p=5, d_s=4, t_range=(1, 3), noise_sigma=0.0, seed=9)
        records, latents = generate_synthetic(spec), synthetic_latents(spec)
        a_p, a_s = planted_maps(spec)
        assert latents.shape == (6, 3)
        assert a_p.shape == (3, 5) and a_s.shape == (3, 4)
        for r, u in zip(records, latents):
            for row in r.seq_tokens:
                np.testing.assert_array_equal(row, u @ a_p)
            for row in r.struct_tokens:
                np.testing.assert_array_equal(row, u @ a_s)

    def test_default_latents_are_nearly_orthogonal(self):
        spec = SynthSpec()
        latents = synthetic_latents(spec)
        unit = latents / np.linalg.norm(latents, axis=1, keepdims=True)
        cosines = unit @ unit.T
        off = cosines[~np.eye(spec.n_pairs, dtype=bool)]
        np.testing.assert_allclose(np.diag(cosines), 1.0, atol=1e-12)
        # independent directions in 16 dims: E|cos| is about sqrt(2 / (16 pi)) ~ 0.2
        assert np.mean(np.abs(off)) < 0.3
        assert abs(np.mean(off)) < 0.05

    @pytest.mark.parametrize("changes", [
        {"n_pairs": 0},
        {"latent_dim": 0},
        {"latent_dim": 40},
        {"t_range": (5, 4)},
        {"t_range": (0, 4)},
        {"noise_sigma": -0.1},
    ])
    def test_invalid_spec(self, changes):
        with pytest.raises(ConfigurationError):
            SynthSpec(**changes)


class TestSplit:
    """Tests for deterministic train/val/test splitting."""

    def test_sizes(self):
        assert split_sizes(100, (0.7, 0.2, 0.1)) == (70, 20, 10)
        assert split_sizes(512, (0.75, 0.0, 0.25)) == (384, 0, 128)
        assert split_sizes(10, (1.0, 0.0, 0.0)) == (10, 0, 0)

    def test_remainder_goes_to_train(self):
        assert split_sizes(10, (0.33, 0.33, 0.34)) == (4, 3, 3)

    def test_disjoint_and_deterministic(self):
        records = make_records(30)
        train, val, test = split(records, (0.6, 0.2, 0.2), seed=5)
        ids = [r.id for r in train + val + test]
        assert len(ids) == len(set(ids)) == 30
        again = split(records, (0.6, 0.2, 0.2), seed=5)
        assert [r.id for r in again[0]] == [r.id for r in train]

    def test_everything_in_train(self):
        train, val, test = split(make_records(7), (1.0, 0.0, 0.0), seed=0)
        assert (len(train), len(val), len(test)) == (7, 0, 0)

    def test_empty_input(self):
        with pytest.raises(ValidationError):
            split([], (0.5, 0.5, 0.0), seed=0)

    def test_fractions_above_one(self):
        with pytest.raises(ValidationError):
            split_sizes(10, (0.8, 0.3, 0.0))


class TestBatching:
    """Tests for shuffled mini-batches."""

    def test_partial_final_batch(self):
        batches = make_batches(make_records(10), 4, Rng(0))
        assert [b.size for b in batches] == [4, 4, 2]

    def test_epochs_permute_the_same_multiset(self):
        records = make_records(10)
        rng = Rng(1)
        first = [i for b in make_batches(records, 3, rng) for i in b.ids]
        second = [i for b in make_batches(records, 3, rng) for i in b.ids]
        assert first != second
        assert Counter(first) == Counter(second) == Counter(r.id for r in records)

    def test_padding_masks(self):
        records = make_records(3)
        batch = build_batch(records)
        assert batch.seq.shape == (3, 3, 3)
        assert batch.seq_mask.sum(axis=1).tolist() == [r.t_p for r in records]
        assert batch.struct_mask.sum(axis=1).tolist() == [r.t_s for r in records]

    def test_invalid_batch_size(self):
        with pytest.raises(ConfigurationError):
            make_batches(make_records(3), 0, Rng(0))
