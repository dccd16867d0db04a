"""Multi-label losses with analytic gradients with respect to the logits.

Every per-sample loss accepts ``y`` (multi-hot, or soft probabilities for
``soft_zlpr``) and ``s`` (logits) of shape ``(L,)`` or ``(B, L)``. The
returned :class:`LossResult` carries a value per row (a float for 1-D input)
and a gradient with the shape of ``s``.

The log(1 + sum exp) terms never exponentiate raw logits; they go through
the shifted helpers in :mod:`zlprlab.numerics`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import UsageError
from .numerics import (
    as_finite,
    descending_ranks,
    log_sigmoid,
    masked_log1p_sum_exp,
    masked_log_sum_exp,
    softplus,
    stable_sigmoid,
)

KINDS = (
    "zlpr",
    "tlpr",
    "soft_zlpr",
    "lsep",
    "lsep_sampled",
    "bce",
    "focal",
    "dice1",
    "dice2",
    "hinge_rank",
    "warp",
    "bpmll_log",
)

# Losses that only order the categories; they carry no threshold of their own.
RANK_ONLY_KINDS = ("lsep", "lsep_sampled", "hinge_rank", "warp", "bpmll_log")
BATCH_COUPLED_KINDS = ("dice2",)
BASELINE_KINDS = ("focal", "dice1", "hinge_rank", "warp", "bpmll_log", "lsep", "lsep_sampled")

ALIASES = {
    "fl": "focal",
    "dl1": "dice1",
    "dl2": "dice2",
    "rl": "hinge_rank",
    "ranking": "hinge_rank",
    "bp-mll": "bpmll_log",
    "bpmll": "bpmll_log",
    "soft-zlpr": "soft_zlpr",
    "lsep-sampled": "lsep_sampled",
}


def resolve_kind(name):
    """Canonical loss kind for a name or short alias (``fl``, ``dl2``, ...)."""
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in KINDS:
        raise UsageError(f"unknown loss kind {name!r}; expected one of {', '.join(KINDS)}")
    return key


@dataclass(frozen=True)
class LossSpec:
    """A loss kind plus every hyperparameter any kind might read."""

    kind: str = "zlpr"
    gamma_fl: float = 2.0
    gamma_dl1: float = 1.0
    gamma_dl2: float = 1.0
    alpha_rl: float = 1.0
    alpha_warp: float = 1.0
    s0: float = 0.0
    sample_budget_t: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", resolve_kind(self.kind))
        for name in ("gamma_fl", "gamma_dl1", "gamma_dl2", "alpha_rl", "alpha_warp", "s0"):
            if not math.isfinite(getattr(self, name)):
                raise UsageError(f"{name} must be finite")
        if int(self.sample_budget_t) < 1:
            raise UsageError("sample_budget_t must be a positive integer")

    def with_kind(self, kind):
        return replace(self, kind=kind)


@dataclass
class LossResult:
    value: float | np.ndarray
    gradient: np.ndarray
    # True where a loss had to fall back on a convention (bpmll_log with an empty side).
    degenerate: bool | np.ndarray = field(default=False)


def _check_binary(y, s):
    s = as_finite(s, "logits")
    y = np.asarray(y)
    if y.shape != s.shape:
        raise UsageError(f"label shape {y.shape} does not match logit shape {s.shape}")
    if s.ndim not in (1, 2) or s.shape[-1] < 1:
        raise UsageError("expected logits of shape (L,) or (B, L) with L >= 1")
    if not np.all((y == 0) | (y == 1)):
        raise UsageError("multi-hot labels must be 0/1")
    return y.astype(bool), s


def _out(value, grad, degenerate=False):
    if np.ndim(value) == 0:
        value = float(value)
        if np.ndim(degenerate) == 0:
            degenerate = bool(degenerate)
    return LossResult(value, grad, degenerate)


def zlpr(y, s):
    """log(1 + sum_pos e^-s_i) + log(1 + sum_neg e^s_j): positives pushed above 0, negatives below."""
    pos, s = _check_binary(y, s)
    a, wa = masked_log1p_sum_exp(-s, pos)
    b, wb = masked_log1p_sum_exp(s, ~pos)
    return _out(a + b, wb - wa)


def tlpr(y, s, s0=0.0):
    """ZLPR with an explicit threshold ``s0`` in place of zero."""
    pos, s = _check_binary(y, s)
    s0 = float(s0)
    if not math.isfinite(s0):
        raise UsageError("s0 must be finite")
    a, wa = masked_log1p_sum_exp(-s, pos, offset=-s0)
    b, wb = masked_log1p_sum_exp(s, ~pos, offset=s0)
    return _out(a + b, wb - wa)


def soft_zlpr(p, s):
    """ZLPR with a soft target: per-category positive probabilities ``p``.

    Entries with ``p == 0`` drop out of the positive sum and entries with
    ``p == 1`` drop out of the negative sum, so binary ``p`` reproduces
    :func:`zlpr` bit for bit.
    """
    s = as_finite(s, "logits")
    p = as_finite(p, "soft labels")
    if p.shape != s.shape:
        raise UsageError(f"soft label shape {p.shape} does not match logit shape {s.shape}")
    if np.any((p < 0) | (p > 1)):
        raise UsageError("soft labels must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        log_p = np.log(p)
        log_q = np.log1p(-p)
    a, wa = masked_log1p_sum_exp(log_p - s, p > 0)
    b, wb = masked_log1p_sum_exp(log_q + s, p < 1)
    return _out(a + b, wb - wa)


def bce(y, s):
    """Binary cross entropy summed over categories."""
    pos, s = _check_binary(y, s)
    value = np.where(pos, softplus(-s), softplus(s)).sum(axis=-1)
    grad = stable_sigmoid(s) - pos
    return _out(value, np.asarray(grad, dtype=np.float64))


def bce_expanded_reference(y, s, max_side=20):
    """BCE written as log(1 + sum over non-empty subsets) on each side.

    Enumerates every non-empty subset of the positive and of the negative
    categories, so cost is exponential; capped at ``max_side`` per side.
    """
    pos, s = _check_binary(y, s)
    if s.ndim != 1:
        raise UsageError("bce_expanded_reference takes a single example")
    pos_idx = np.flatnonzero(pos)
    neg_idx = np.flatnonzero(~pos)
    if len(pos_idx) > max_side or len(neg_idx) > max_side:
        raise UsageError(f"subset enumeration capped at {max_side} categories per side")

    def side(values):
        terms = [1.0]
        for k in range(1, len(values) + 1):
            for combo in itertools.combinations(values, k):
                terms.append(math.exp(math.fsum(combo)))
        return math.log(math.fsum(terms))

    return side([-float(s[i]) for i in pos_idx]) + side([float(s[j]) for j in neg_idx])


def focal(y, s, gamma=2.0):
    """Focal loss with p = sigmoid(s)."""
    pos, s = _check_binary(y, s)
    p = stable_sigmoid(s)
    q = stable_sigmoid(-s)
    log_p = log_sigmoid(s)
    log_q = log_sigmoid(-s)
    value = np.where(pos, -(q**gamma) * log_p, -(p**gamma) * log_q).sum(axis=-1)
    grad = np.where(
        pos,
        gamma * p * q**gamma * log_p - q ** (gamma + 1),
        -gamma * p**gamma * q * log_q + p ** (gamma + 1),
    )
    return _out(value, grad)


def dice1(y, s, gamma=1.0):
    """Per-sample dice loss (first version) with p = sigmoid(s)."""
    pos, s = _check_binary(y, s)
    p = stable_sigmoid(s)
    dp = p * stable_sigmoid(-s)
    d_pos = p * p + 1.0 + gamma
    d_neg = p * p + gamma
    value = np.where(pos, 1.0 - (2.0 * p + gamma) / d_pos, 1.0 - gamma / d_neg).sum(axis=-1)
    dv_dp = np.where(
        pos,
        -(2.0 * d_pos - (2.0 * p + gamma) * 2.0 * p) / d_pos**2,
        2.0 * gamma * p / d_neg**2,
    )
    return _out(value, dv_dp * dp)


def dice2_batch(y, s, gamma=1.0):
    """Batch dice loss: counts are pooled over the batch axis per label.

    Takes ``(B, L)`` arrays and returns one value for the whole batch with a
    ``(B, L)`` gradient; samples are coupled through the pooled sums.
    """
    pos, s = _check_binary(y, s)
    if s.ndim != 2:
        raise UsageError("dice2_batch needs a (B, L) batch")
    yf = pos.astype(np.float64)
    p = stable_sigmoid(s)
    dp = p * stable_sigmoid(-s)
    num = 2.0 * (p * yf).sum(axis=0) + gamma
    den = (p * p).sum(axis=0) + yf.sum(axis=0) + gamma
    value = float(np.sum(1.0 - num / den))
    dv_dp = -(2.0 * yf * den - num * 2.0 * p) / den**2
    return LossResult(value, dv_dp * dp)


def _pair_mask(pos):
    return pos[..., :, None] & ~pos[..., None, :]


def hinge_rank(y, s, alpha=1.0):
    """Pairwise hinge: sum over (pos i, neg j) of max(0, alpha + s_j - s_i)."""
    pos, s = _check_binary(y, s)
    margin = alpha + s[..., None, :] - s[..., :, None]
    active = _pair_mask(pos) & (margin > 0)
    value = np.where(active, margin, 0.0).sum(axis=(-2, -1))
    a = active.astype(np.float64)
    return _out(value, a.sum(axis=-2) - a.sum(axis=-1))


def warp(y, s, alpha=1.0):
    """Rank-weighted pairwise hinge with weight w(r_i) = r_i.

    The rank is computed over all L categories (1 = highest score, ties by
    index) and treated as locally constant when differentiating.
    """
    pos, s = _check_binary(y, s)
    margin = alpha + s[..., None, :] - s[..., :, None]
    active = _pair_mask(pos) & (margin > 0)
    w = descending_ranks(s).astype(np.float64)[..., :, None] * active
    value = (w * margin).sum(axis=(-2, -1))
    return _out(value, w.sum(axis=-2) - w.sum(axis=-1))


def bpmll_log(y, s):
    """log of the BP-MLL pairwise exponential sum, i.e. log sum exp(s_j - s_i).

    Defined as 0 (with ``degenerate`` set) when either side is empty.
    """
    pos, s = _check_binary(y, s)
    a, wa = masked_log_sum_exp(-s, pos)
    b, wb = masked_log_sum_exp(s, ~pos)
    degenerate = ~(pos.any(axis=-1) & (~pos).any(axis=-1))
    value = np.where(degenerate, 0.0, a + b)
    grad = np.where(degenerate[..., None], 0.0, wb - wa)
    return _out(value, grad, degenerate)


def _lsep_from_mask(s, mask):
    diff = s[..., None, :] - s[..., :, None]
    shape = diff.shape
    flat = diff.reshape(shape[:-2] + (-1,))
    value, w = masked_log1p_sum_exp(flat, mask.reshape(flat.shape))
    w = w.reshape(shape)
    return _out(value, w.sum(axis=-2) - w.sum(axis=-1))


def lsep(y, s):
    """log(1 + sum over all (pos i, neg j) of exp(s_j - s_i))."""
    pos, s = _check_binary(y, s)
    return _lsep_from_mask(s, _pair_mask(pos))


def sample_pair_mask(y, t, seed):
    """Pick min(t, #pairs) distinct (pos, neg) pairs per row, uniformly.

    ``seed`` is anything :class:`numpy.random.SeedSequence` accepts. Rows
    whose pair count does not exceed ``t`` keep every pair and draw nothing.
    """
    pos = np.asarray(y).astype(bool)
    full = _pair_mask(pos)
    rows = full.reshape(-1, full.shape[-2] * full.shape[-1])
    out = np.zeros_like(rows)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    for r, row in enumerate(rows):
        idx = np.flatnonzero(row)
        if len(idx) <= t:
            out[r, idx] = True
        else:
            out[r, idx[rng.choice(len(idx), size=int(t), replace=False)]] = True
    return out.reshape(full.shape)


def lsep_sampled(y, s, t, seed=0):
    """LSEP restricted to at most ``t`` sampled pairs per example."""
    pos, s = _check_binary(y, s)
    if int(t) < 1:
        raise UsageError("sample budget t must be positive")
    return _lsep_from_mask(s, sample_pair_mask(pos, int(t), seed))


def compute_loss(spec, y, s, seed=None):
    """Evaluate a per-sample loss described by ``spec``.

    For ``soft_zlpr`` the ``y`` argument is the soft target. ``seed``
    overrides ``spec.rng_seed`` for ``lsep_sampled``.
    """
    kind = spec.kind
    if kind == "zlpr":
        return zlpr(y, s)
    if kind == "tlpr":
        return tlpr(y, s, spec.s0)
    if kind == "soft_zlpr":
        return soft_zlpr(y, s)
    if kind == "bce":
        return bce(y, s)
    if kind == "focal":
        return focal(y, s, spec.gamma_fl)
    if kind == "dice1":
        return dice1(y, s, spec.gamma_dl1)
    if kind == "hinge_rank":
        return hinge_rank(y, s, spec.alpha_rl)
    if kind == "warp":
        return warp(y, s, spec.alpha_warp)
    if kind == "bpmll_log":
        return bpmll_log(y, s)
    if kind == "lsep":
        return lsep(y, s)
    if kind == "lsep_sampled":
        return lsep_sampled(y, s, spec.sample_budget_t, spec.rng_seed if seed is None else seed)
    raise UsageError(f"{kind} is batch-coupled; use batch_loss")


def baseline_loss(spec, y, s):
    """The comparison losses (focal, dice1, hinge, WARP, BP-MLL, LSEP variants)."""
    if spec.kind not in BASELINE_KINDS:
        raise UsageError(f"{spec.kind} is not a baseline loss kind")
    return compute_loss(spec, y, s)


def batch_loss(spec, y, s, seed=None):
    """Scalar training loss for a ``(B, L)`` batch and its ``(B, L)`` gradient.

    Per-sample kinds are averaged over the batch. ``dice2`` is already a
    batch quantity and is returned as is.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < 1:
        raise UsageError("batch_loss needs a non-empty (B, L) batch")
    if spec.kind == "dice2":
        return dice2_batch(y, s, spec.gamma_dl2)
    res = compute_loss(spec, y, s, seed=seed)
    b = s.shape[0]
    return LossResult(float(np.mean(res.value)), res.gradient / b, res.degenerate)


@dataclass(frozen=True)
class DecisionRule:
    """How logits become a predicted label set."""

    kind: str = "zero_threshold"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero_threshold", "threshold", "top_k"):
            raise UsageError(f"unknown decision rule {self.kind!r}")

    @classmethod
    def parse(cls, text):
        """``zero``/``zero_threshold``, ``threshold:<tau>`` or ``top_k:<k>``."""
        name, _, arg = text.partition(":")
        name = name.strip().lower().replace("-", "_")
        if name in ("zero", "zero_threshold"):
            return cls()
        try:
            if name in ("threshold", "tau"):
                return cls("threshold", float(arg))
            if name in ("top_k", "topk"):
                return cls("top_k", int(arg))
        except ValueError:
            raise UsageError(f"bad argument in decision rule {text!r}") from None
        raise UsageError(f"cannot parse decision rule {text!r}")

    def __str__(self):
        if self.kind == "zero_threshold":
            return "zero_threshold"
        if self.kind == "top_k":
            return f"top_k:{int(self.value)}"
        return f"threshold:{self.value!r}"


def decide(s, rule=DecisionRule()):
    """Predicted multi-hot labels (uint8) from logits, row-wise."""
    if isinstance(rule, str):
        rule = DecisionRule.parse(rule)
    s = as_finite(s, "logits")
    if rule.kind == "zero_threshold":
        return (s > 0).astype(np.uint8)
    if rule.kind == "threshold":
        return (s > rule.value).astype(np.uint8)
    k = int(rule.value)
    if k != rule.value or not 0 <= k <= s.shape[-1]:
        raise UsageError(f"top_k needs 0 <= k <= {s.shape[-1]}, got {rule.value}")
    out = np.zeros(s.shape, dtype=np.uint8)
    order = np.argsort(-s, axis=-1, kind="stable")[..., :k]
    np.put_along_axis(out, order, 1, axis=-1)
    return out
