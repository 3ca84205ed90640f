"""
Tests for the dense kernels in crossalign.numkit.
"""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from crossalign.exceptions import (
    ConfigurationError,
    DegenerateMaskError,
    DegenerateVectorError,
    NonFiniteError,
    ShapeError,
)
from crossalign.numkit import (
    Rng,
    l2_normalize,
    layer_norm,
    matmul,
    pad_sequences,
    softmax_row,
)


def naive_matmul(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    return [[sum(a[i][k] * b[k][j] for k in range(inner)) for j in range(cols)] for i in range(rows)]


class TestMatmul:
    def test_identity(self):
        m = np.arange(12.0).reshape(3, 4)
        assert_array_equal(matmul(np.eye(3), m), m)

    def test_hand_checked(self):
        assert_array_equal(matmul([[1, 2], [3, 4]], [[1], [1]]), [[3], [7]])

    def test_matches_naive_loop(self):
        rng = Rng(3)
        a, b = rng.normal(1.0, (5, 7)), rng.normal(1.0, (7, 4))
        assert_allclose(matmul(a, b), naive_matmul(a.tolist(), b.tolist()), atol=1e-12)

    def test_batched_left_operand(self):
        rng = Rng(4)
        a, b = rng.normal(1.0, (2, 3, 5)), rng.normal(1.0, (5, 6))
        out = matmul(a, b)
        assert out.shape == (2, 3, 6)
        assert_allclose(out[1], a[1] @ b)

    def test_inner_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((4, 2)))

    def test_non_finite_result(self):
        with pytest.raises(NonFiniteError):
            matmul([[np.nan, 1.0]], [[1.0], [1.0]])


class TestSoftmax:
    def test_uniform(self):
        assert_allclose(softmax_row([0.0, 0.0, 0.0]), [1 / 3] * 3)

    def test_large_logits_do_not_overflow(self):
        out = softmax_row([1000.0, 0.0])
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0)
        assert out[1] == pytest.approx(0.0, abs=1e-300)

    def test_masked_entries(self):
        out = softmax_row([1.0, 2.0, 3.0], [True, False, True])
        e2 = math.exp(2)
        assert out[1] == 0.0
        assert_allclose(out, [1 / (1 + e2), 0.0, e2 / (1 + e2)], atol=1e-15)

    def test_rows_sum_to_one_and_shift_invariant(self):
        rng = Rng(5)
        x = rng.normal(3.0, (4, 6))
        out = softmax_row(x)
        assert_allclose(out.sum(axis=-1), 1.0, atol=1e-12)
        assert_allclose(softmax_row(x + 17.5), out, atol=1e-12)

    def test_all_masked_row(self):
        with pytest.raises(DegenerateMaskError):
            softmax_row([[1.0, 2.0], [3.0, 4.0]], [[True, False], [False, False]])

    def test_mask_shape_mismatch(self):
        with pytest.raises(ShapeError):
            softmax_row([1.0, 2.0], [True])


class TestLayerNorm:
    def test_constant_vector_collapses_to_bias(self):
        assert_array_equal(layer_norm([2.0, 2.0, 2.0], np.ones(3), np.zeros(3)), np.zeros(3))

    def test_hand_checked_without_epsilon(self):
        assert_allclose(layer_norm([1.0, 3.0], [1.0, 1.0], [0.0, 0.0], epsilon=0.0), [-1.0, 1.0])

    def test_zero_gain_gives_bias(self):
        bias = np.array([0.5, -1.0, 2.0])
        assert_array_equal(layer_norm([1.0, 5.0, -3.0], np.zeros(3), bias), bias)

    def test_standardized_moments(self):
        x = Rng(6).normal(2.0, (3, 64))
        out = layer_norm(x, np.ones(64), np.zeros(64))
        assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        assert_allclose(out.var(axis=-1), 1.0, atol=1e-4)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            layer_norm([1.0, 2.0, 3.0], np.ones(2), np.zeros(3))


class TestL2Normalize:
    def test_three_four_five(self):
        assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8])

    def test_idempotent(self):
        v = l2_normalize(Rng(7).normal(1.0, 9))
        assert_allclose(l2_normalize(v), v, atol=1e-15)

    def test_rows_are_unit(self):
        out = l2_normalize(Rng(8).normal(1.0, (5, 4)))
        assert_allclose(np.linalg.norm(out, axis=-1), 1.0, atol=1e-12)

    def test_zero_vector(self):
        with pytest.raises(DegenerateVectorError):
            l2_normalize([0.0, 0.0])


class TestPadSequences:
    def test_mask_marks_real_tokens(self):
        padded, mask = pad_sequences([np.ones((2, 3)), np.ones((4, 3))])
        assert padded.shape == (2, 4, 3)
        assert_array_equal(mask, [[True, True, False, False], [True, True, True, True]])
        assert np.all(padded[0, 2:] == 0.0)

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            pad_sequences([np.ones((2, 3)), np.ones((2, 4))])


class TestRng:
    def test_same_seed_same_draws(self):
        assert_array_equal(Rng(11).normal(1.0, 10), Rng(11).normal(1.0, 10))

    def test_streams_are_independent(self):
        root = Rng(11)
        assert not np.array_equal(root.child(0).normal(1.0, 10), root.child(1).normal(1.0, 10))

    def test_integers_inclusive(self):
        draws = Rng(2).integers(4, 6, 500)
        assert set(draws.tolist()) == {4, 5, 6}

    def test_invalid_seed(self):
        with pytest.raises(ConfigurationError):
            Rng(-1)
