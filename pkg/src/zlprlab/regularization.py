"""Score-to-probability transform, divergences between score vectors, label smoothing.

Scores trained with ZLPR map to per-category probabilities through
sigmoid(2s), not sigmoid(s): that is where the soft-ZLPR gradient vanishes.
"""

from __future__ import annotations

import numpy as np

from .errors import UsageError
from .numerics import as_finite, softplus, stable_sigmoid


def score_to_probability(s):
    """sigmoid(2 s) per coordinate."""
    s = as_finite(s, "scores")
    return np.asarray(stable_sigmoid(2.0 * s), dtype=np.float64)


def _pair(s, s_prime):
    s = as_finite(s, "s")
    t = as_finite(s_prime, "s_prime")
    if s.shape != t.shape:
        raise UsageError(f"length mismatch {s.shape} vs {t.shape}")
    return s, t


def kl_divergence(s, s_prime):
    """Sum over categories of KL(Bernoulli(p_i) || Bernoulli(p'_i)), p = sigmoid(2s).

    Uses 2 p_i (s_i - s'_i) + log((1 - p_i) / (1 - p'_i)), with the log ratio
    written as softplus(2 s'_i) - softplus(2 s_i) so 1 - p never underflows.
    Sums over the last axis.
    """
    s, t = _pair(s, s_prime)
    p = score_to_probability(s)
    terms = 2.0 * p * (s - t) + softplus(2.0 * t) - softplus(2.0 * s)
    out = np.sum(terms, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def symmetric_divergence(s, s_prime):
    """KL(s, s') + KL(s', s) in closed form: sum 2 (p_i - p'_i)(s_i - s'_i)."""
    s, t = _pair(s, s_prime)
    out = np.sum(2.0 * (score_to_probability(s) - score_to_probability(t)) * (s - t), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def smooth_labels(y, epsilon):
    """Two-sided label smoothing: positives become 1 - eps, negatives eps."""
    if not 0.0 <= epsilon < 0.5:
        raise UsageError(f"epsilon must be in [0, 0.5), got {epsilon}")
    y = np.asarray(y)
    if not np.all((y == 0) | (y == 1)):
        raise UsageError("multi-hot labels must be 0/1")
    return np.where(y == 1, 1.0 - epsilon, epsilon).astype(np.float64)


def stationary_scores(p):
    """Logits at which soft-ZLPR with target ``p`` is stationary: logit(p) / 2."""
    p = as_finite(p, "p")
    if np.any((p <= 0) | (p >= 1)):
        raise UsageError("stationary scores need 0 < p < 1")
    return 0.5 * (np.log(p) - np.log1p(-p))
