import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zlprlab.errors import UsageError
from zlprlab.regularization import (
    kl_divergence,
    score_to_probability,
    smooth_labels,
    stationary_scores,
    symmetric_divergence,
)

vec3 = arrays(np.float64, 3, elements=st.floats(-15, 15))


def kl_direct(s, t):
    total = 0.0
    for a, b in zip(s, t):
        p, q = 1 / (1 + math.exp(-2 * a)), 1 / (1 + math.exp(-2 * b))
        total += p * math.log(p / q) + (1 - p) * math.log((1 - p) / (1 - q))
    return total


class TestProbability:
    def test_values(self):
        np.testing.assert_allclose(score_to_probability([0.0]), [0.5])
        np.testing.assert_allclose(
            score_to_probability([-1.0, 1.0]), [0.11920292202211755, 0.8807970779778824], rtol=1e-15
        )

    def test_stationary_scores_invert(self):
        p = np.array([0.01, 0.3, 0.5, 0.8, 0.99])
        np.testing.assert_allclose(score_to_probability(stationary_scores(p)), p, rtol=1e-14)
        assert stationary_scores([0.8])[0] == pytest.approx(math.log(4) / 2, abs=1e-15)


class TestKL:
    def test_self_is_zero(self):
        assert kl_divergence([0.0], [0.0]) == 0.0

    def test_value(self):
        # mpmath: KL(Bern(1/2) || Bern(sigmoid(2)))
        assert kl_divergence([0.0], [1.0]) == pytest.approx(0.433780830483027, abs=1e-14)

    def test_symmetric_value(self):
        # 2 (sigmoid(2) - 1/2) = tanh(1)
        assert symmetric_divergence([0.0], [1.0]) == pytest.approx(0.7615941559557649, abs=1e-14)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            s, t = rng.normal(0, 2, size=(2, 4))
            assert kl_divergence(s, t) == pytest.approx(kl_direct(s, t), rel=1e-9, abs=1e-13)

    def test_extreme_scores_stay_finite(self):
        v = kl_divergence([200.0, -200.0], [-200.0, 200.0])
        assert np.isfinite(v) and v > 0

    def test_batched(self):
        s = np.array([[0.0, 1.0], [2.0, -1.0]])
        t = np.zeros((2, 2))
        v = kl_divergence(s, t)
        assert v.shape == (2,)
        assert v[0] == pytest.approx(kl_divergence([0.0, 1.0], [0.0, 0.0]))

    def test_length_mismatch(self):
        with pytest.raises(UsageError):
            kl_divergence([0.0], [0.0, 1.0])

    @given(vec3, vec3)
    def test_nonnegative(self, s, t):
        assert kl_divergence(s, t) >= -1e-12

    @given(vec3, vec3)
    def test_symmetric_is_sum_of_both_directions(self, s, t):
        assert abs(symmetric_divergence(s, t) - kl_divergence(s, t) - kl_divergence(t, s)) <= 1e-10


class TestSmoothing:
    def test_values(self):
        np.testing.assert_allclose(smooth_labels([1, 0, 1], 0.1), [0.9, 0.1, 0.9])
        np.testing.assert_array_equal(smooth_labels([1, 0], 0.0), [1.0, 0.0])

    @pytest.mark.parametrize("eps", [-0.1, 0.5, 0.7])
    def test_bad_epsilon(self, eps):
        with pytest.raises(UsageError):
            smooth_labels([1, 0], eps)
