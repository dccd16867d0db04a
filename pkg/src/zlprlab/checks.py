"""Randomized analytic-vs-finite-difference gradient checks for every loss kind."""

from __future__ import annotations

import numpy as np

from . import losses
from .data import make_rng
from .losses import KINDS, LossSpec
from .numerics import finite_difference_gradient, gradient_error

KINK_GAP = 1e-3


def _too_close_to_kink(kind, spec, y, s):
    pos = np.asarray(y).astype(bool)
    if kind in ("hinge_rank", "warp"):
        alpha = spec.alpha_rl if kind == "hinge_rank" else spec.alpha_warp
        margin = alpha + s[..., None, :] - s[..., :, None]
        pairs = pos[..., :, None] & ~pos[..., None, :]
        if np.any(pairs & (np.abs(margin) <= KINK_GAP)):
            return True
    if kind == "warp":
        # the rank weight jumps where two scores cross
        gap = np.abs(s[..., None, :] - s[..., :, None])
        off_diag = ~np.eye(s.shape[-1], dtype=bool)
        if np.any(gap[..., off_diag] <= KINK_GAP):
            return True
    return False


def random_instance(kind, rng, max_labels=8, max_batch=4, spec=None):
    """Draw ``(target, logits)`` for ``kind``, resampling away from hinge kinks."""
    spec = spec or LossSpec(kind)
    while True:
        L = int(rng.integers(1, max_labels + 1))
        shape = (int(rng.integers(1, max_batch + 1)), L) if kind == "dice2" else (L,)
        s = rng.normal(0.0, 2.0, size=shape)
        if kind == "soft_zlpr":
            y = rng.uniform(0.0, 1.0, size=shape)
        else:
            y = (rng.uniform(size=shape) < 0.5).astype(np.uint8)
        if not _too_close_to_kink(kind, spec, y, s):
            return y, s


def loss_value_and_grad(spec, y, s):
    if spec.kind == "dice2":
        res = losses.dice2_batch(y, s, spec.gamma_dl2)
    else:
        res = losses.compute_loss(spec, y, s)
    return res.value, res.gradient


def gradient_check(kind, trials=200, seed=0, max_labels=8, h=1e-5, spec=None):
    """Worst :func:`gradient_error` over ``trials`` random instances of ``kind``."""
    spec = spec or LossSpec(kind, s0=0.5, sample_budget_t=3)
    rng = make_rng((seed, KINDS.index(spec.kind)))
    worst = 0.0
    for _ in range(trials):
        y, s = random_instance(spec.kind, rng, max_labels=max_labels, spec=spec)
        _, analytic = loss_value_and_grad(spec, y, s)
        numeric = finite_difference_gradient(lambda v: loss_value_and_grad(spec, y, v)[0], s, h)
        worst = max(worst, gradient_error(analytic, numeric))
    return worst
