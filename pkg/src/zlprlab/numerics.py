"""Stable log-sum-exp style primitives and a central-difference gradient oracle.

Everything here works in float64. Inputs are checked for finiteness at the
public boundary; the ``masked_*`` helpers are internal building blocks that
accept boolean masks instead of ragged index sets so the losses can be
vectorized over a batch.
"""

from __future__ import annotations

import numpy as np


def as_finite(x, name="input"):
    """Return ``x`` as a float64 array, raising ``ValueError`` on NaN/Inf."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def log_sum_exp(xs):
    """log(sum(exp(xs))) over a non-empty 1-D sequence, shifted by the max."""
    xs = as_finite(xs, "xs").ravel()
    if xs.size == 0:
        raise ValueError("log_sum_exp of an empty sequence is undefined")
    m = xs.max()
    return float(m + np.log(np.sum(np.exp(xs - m))))


def log1p_sum_exp(xs):
    """log(1 + sum(exp(xs))); exactly 0 for an empty sequence."""
    xs = as_finite(xs, "xs").ravel()
    if xs.size == 0:
        return 0.0
    return log_sum_exp(np.concatenate(([0.0], xs)))


def stable_sigmoid(x):
    """Logistic function without overflow; works elementwise on arrays."""
    x = as_finite(x, "x")
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return float(out) if out.ndim == 0 else out


def softplus(x):
    """log(1 + exp(x)) as max(x, 0) + log1p(exp(-|x|))."""
    x = as_finite(x, "x")
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return float(out) if out.ndim == 0 else out


def log_sigmoid(x):
    """log(sigmoid(x)) = -softplus(-x)."""
    x = np.asarray(x, dtype=np.float64)
    return -(np.maximum(-x, 0.0) + np.log1p(np.exp(-np.abs(x))))


def masked_log1p_sum_exp(x, mask, offset=0.0):
    """Row-wise log(exp(offset) + sum_{mask} exp(x)) and its softmax weights.

    ``x`` and ``mask`` share shape ``(..., n)``; ``offset`` broadcasts against
    the leading dimensions. Returns ``(value, weights)`` where ``weights`` has
    the shape of ``x`` and is zero outside the mask. With ``offset = 0`` this
    is log1p_sum_exp over the selected entries.
    """
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    offset = np.asarray(offset, dtype=np.float64)
    masked = np.where(mask, x, -np.inf)
    m = np.maximum(offset, masked.max(axis=-1, initial=-np.inf))
    shifted = np.exp(masked - m[..., None])
    total = np.exp(offset - m) + shifted.sum(axis=-1)
    value = m + np.log(total)
    weights = shifted / total[..., None]
    return value, weights


def masked_log_sum_exp(x, mask):
    """Row-wise log(sum_{mask} exp(x)); rows with an empty mask give -inf and zero weights."""
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    masked = np.where(mask, x, -np.inf)
    m = masked.max(axis=-1, initial=-np.inf)
    safe_m = np.where(np.isfinite(m), m, 0.0)
    shifted = np.exp(masked - safe_m[..., None])
    total = shifted.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = safe_m + np.log(total)
        weights = np.where(total[..., None] > 0, shifted / total[..., None], 0.0)
    return value, weights


def descending_ranks(s):
    """1-based ranks, highest score first, ties broken by ascending index.

    Works row-wise on ``(..., L)`` arrays.
    """
    s = np.asarray(s, dtype=np.float64)
    order = np.argsort(-s, axis=-1, kind="stable")
    ranks = np.empty(s.shape, dtype=np.int64)
    np.put_along_axis(ranks, order, np.arange(1, s.shape[-1] + 1), axis=-1)
    return ranks


def finite_difference_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function of an array.

    ``x`` may have any shape; the result has the same shape.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        g[i] = (fp - fm) / (2.0 * h)
    return grad


def gradient_error(analytic, numeric, floor=1e-2):
    """Worst per-entry error |a - b| / max(|a|, |b|, floor).

    A value below ``rtol`` means relative agreement to ``rtol`` for large
    entries and absolute agreement to ``rtol * floor`` near zero.
    """
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
