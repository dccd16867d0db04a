"""Exact expected risk over an explicit joint distribution of label configurations.

A configuration is an integer bitmask: bit ``l`` set means category ``l`` is
positive. With every configuration enumerated (L <= 12) the risk, its
gradient and the risk minimiser can be computed without sampling, which lets
us check where each loss puts its optimum: BCE at the per-label log-odds,
ZLPR at a point that also depends on how the labels co-occur.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonConvergenceError, ParseError, SchemaError, UsageError
from .losses import BATCH_COUPLED_KINDS, LossSpec, compute_loss, soft_zlpr
from .numerics import as_finite, masked_log1p_sum_exp

MAX_LABELS = 12


def configurations(label_count):
    """``(2**L, L)`` uint8 matrix; row ``m`` is the multi-hot vector of bitmask ``m``."""
    masks = np.arange(2**label_count)
    return ((masks[:, None] >> np.arange(label_count)) & 1).astype(np.uint8)


@dataclass(frozen=True)
class JointLabelDistribution:
    label_count: int
    probs: np.ndarray

    def __post_init__(self):
        L = int(self.label_count)
        if not 1 <= L <= MAX_LABELS:
            raise UsageError(f"label_count must be in 1..{MAX_LABELS}, got {L}")
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (2**L,):
            raise UsageError(f"expected {2**L} probabilities, got shape {probs.shape}")
        if np.any(~np.isfinite(probs)) or np.any(probs < 0):
            raise UsageError("probabilities must be finite and nonnegative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise UsageError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "label_count", L)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_mapping(cls, label_count, table):
        """Build from ``{config: prob}`` where config is a bitmask or a 0/1 sequence."""
        probs = np.zeros(2**label_count)
        for key, value in table.items():
            if isinstance(key, (int, np.integer)):
                mask = int(key)
            else:
                bits = list(key)
                if len(bits) != label_count:
                    raise UsageError(f"configuration {key!r} has wrong length")
                mask = sum(int(b) << i for i, b in enumerate(bits))
            probs[mask] += value
        return cls(label_count, probs)

    @property
    def configs(self):
        return configurations(self.label_count)

    def marginals(self):
        """P(y_l = 1) per label."""
        return self.probs @ self.configs.astype(np.float64)

    def sample(self, n, rng):
        """``n`` configuration bitmasks drawn from the table."""
        return rng.choice(len(self.probs), size=n, p=self.probs)


def load_joint(path):
    """Read ``L <count>`` then ``<bitmask> <probability>`` lines; ``#`` starts a comment.

    Bitmasks not listed have probability 0; a repeated bitmask is an error.
    """
    label_count = None
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if label_count is None:
                if len(parts) != 2 or parts[0] != "L":
                    raise ParseError("expected header 'L <count>'", lineno)
                try:
                    label_count = int(parts[1])
                except ValueError:
                    raise ParseError(f"bad label count {parts[1]!r}", lineno) from None
                if not 1 <= label_count <= MAX_LABELS:
                    raise SchemaError(f"label count must be in 1..{MAX_LABELS}", lineno)
                continue
            if len(parts) != 2:
                raise ParseError("expected '<bitmask> <probability>'", lineno)
            try:
                mask, prob = int(parts[0]), float(parts[1])
            except ValueError:
                raise ParseError(f"cannot parse {line!r}", lineno) from None
            if not 0 <= mask < 2**label_count:
                raise SchemaError(f"bitmask {mask} out of range for L={label_count}", lineno)
            if mask in table:
                raise SchemaError(f"bitmask {mask} listed twice", lineno)
            if not (math.isfinite(prob) and prob >= 0):
                raise SchemaError(f"bad probability {parts[1]!r}", lineno)
            table[mask] = prob
    if label_count is None:
        raise ParseError(f"{path}: missing header")
    return JointLabelDistribution.from_mapping(label_count, table)


def save_joint(joint, path, skip_zero=True):
    lines = [f"L {joint.label_count}"]
    for mask, prob in enumerate(joint.probs):
        if prob > 0 or not skip_zero:
            lines.append(f"{mask} {float(prob)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


BUILTIN_JOINTS = {
    # single label that is positive three times out of four
    "single_075": (1, {(1,): 0.75, (0,): 0.25}),
    # two labels that mostly co-occur
    "coupled_2": (2, {(1, 1): 0.5, (1, 0): 0.3, (0, 1): 0.1, (0, 0): 0.1}),
    # two labels that are always equal
    "mirror_2": (2, {(1, 1): 0.5, (0, 0): 0.5}),
}


def builtin_joint(name):
    try:
        L, table = BUILTIN_JOINTS[name]
    except KeyError:
        raise UsageError(f"unknown built-in joint {name!r}; have {', '.join(BUILTIN_JOINTS)}") from None
    return JointLabelDistribution.from_mapping(L, table)


def product_joint(marginals):
    """Independent labels with the given P(y_l = 1)."""
    m = np.asarray(marginals, dtype=np.float64)
    cfg = configurations(len(m)).astype(bool)
    probs = np.prod(np.where(cfg, m, 1.0 - m), axis=1)
    return JointLabelDistribution(len(m), probs / math.fsum(probs))


def prototype_joint(label_count, prototypes, weights, flip):
    """Mixture of prototype label sets, each bit flipped independently with prob ``flip``.

    ``prototypes`` are iterables of positive category indices.
    """
    cfg = configurations(label_count).astype(bool)
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    probs = np.zeros(len(cfg))
    for proto, weight in zip(prototypes, w):
        target = np.zeros(label_count, dtype=bool)
        target[list(proto)] = True
        differs = (cfg != target).sum(axis=1)
        probs += weight * flip**differs * (1.0 - flip) ** (label_count - differs)
    return JointLabelDistribution(label_count, probs / math.fsum(probs))


def expected_loss(joint, s, spec):
    """Exact E_y[loss(y, s)] and its gradient in ``s``."""
    if spec.kind in BATCH_COUPLED_KINDS:
        raise UsageError(f"{spec.kind} couples samples; it has no per-configuration risk")
    s = as_finite(s, "logits")
    if s.shape != (joint.label_count,):
        raise UsageError(f"logits must have length {joint.label_count}")
    cfg = joint.configs
    res = compute_loss(spec, cfg, np.broadcast_to(s, cfg.shape))
    return float(joint.probs @ res.value), joint.probs @ res.gradient


def gradient_descent(fun, x0, tol=1e-8, max_iter=100_000, c=1e-4, step=1.0):
    """Gradient descent with Armijo backtracking (halving) until max|grad| < tol.

    ``fun(x)`` returns ``(value, gradient)``. The step size doubles after
    each accepted step. Once decreases reach rounding level a step is also
    accepted if f stays within a few ulps and the directional derivative
    along -grad is still non-positive at the new point.
    Returns ``(x, value, grad, iterations)``; raises
    :class:`NonConvergenceError` carrying the best iterate at the cap.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    for it in range(max_iter):
        if np.max(np.abs(g)) < tol:
            return x, f, g, it
        gg = float(g @ g)
        slack = 16 * np.finfo(float).eps * max(1.0, abs(f))
        while True:
            x_new = x - step * g
            f_new, g_new = fun(x_new)
            # strict: once c*step*gg is below an ulp of f, "f - c*step*gg" rounds to f
            if f_new < f and f_new <= f - c * step * gg:
                break
            # f is flat to rounding: trust the slope, accept if not past the line minimum
            if f_new <= f + slack and float(g_new @ g) >= 0.0:
                break
            step *= 0.5
            if step < 1e-300:
                raise NonConvergenceError("line search failed", best=x, gradient_norm=float(np.max(np.abs(g))))
        x, f, g = x_new, f_new, g_new
        step = min(step * 2.0, 1e3)
    if np.max(np.abs(g)) < tol:
        return x, f, g, max_iter
    raise NonConvergenceError(
        f"no convergence in {max_iter} iterations", best=x, gradient_norm=float(np.max(np.abs(g)))
    )


@dataclass
class StationarityReport:
    s_star: np.ndarray
    gradient_norm: float
    value: float
    iterations: int
    t1: np.ndarray | None = None
    t2: np.ndarray | None = None

    def identity_error(self):
        """max_l |s*_l - (t1_l + t2_l) / 2| (ZLPR only)."""
        if self.t1 is None:
            return None
        return float(np.max(np.abs(self.s_star - 0.5 * (self.t1 + self.t2))))


def zlpr_decomposition(joint, s):
    """Marginal log-odds term and dependence-coupling term of the ZLPR stationarity condition.

    For each label t::

        t1 = log P(y_t=1) / P(y_t=0)
        t2 = log E[phi1 | y_t=1] / E[phi0 | y_t=0]

    with phi1 = 1 / (1 + <y, e^-s>) and phi0 = 1 / (1 + <1-y, e^s>), both
    evaluated by enumerating the configurations. At a stationary point of the
    ZLPR risk, s_t = (t1 + t2) / 2.
    """
    s = as_finite(s, "logits")
    cfg = joint.configs.astype(bool)
    pos_term, _ = masked_log1p_sum_exp(np.broadcast_to(-s, cfg.shape), cfg)
    neg_term, _ = masked_log1p_sum_exp(np.broadcast_to(s, cfg.shape), ~cfg)
    phi1 = np.exp(-pos_term)
    phi0 = np.exp(-neg_term)
    P = joint.probs
    t1 = np.empty(joint.label_count)
    t2 = np.empty(joint.label_count)
    for t in range(joint.label_count):
        on = cfg[:, t]
        p1, p0 = P[on].sum(), P[~on].sum()
        if p1 <= 0 or p0 <= 0:
            raise ValueError(f"label {t} has a degenerate marginal; the decomposition is undefined")
        t1[t] = math.log(p1 / p0)
        t2[t] = math.log((P[on] @ phi1[on]) / p1) - math.log((P[~on] @ phi0[~on]) / p0)
    return t1, t2


def minimize_expected_loss(joint, spec, init=None, tol=1e-8, max_iter=100_000):
    """Minimise the exact risk by gradient descent from ``init`` (zeros by default).

    For ZLPR the report also carries the t1/t2 decomposition at the optimum.
    """
    if tol <= 0:
        raise UsageError("tol must be positive")
    x0 = np.zeros(joint.label_count) if init is None else as_finite(init, "init")
    x, f, g, it = gradient_descent(lambda v: expected_loss(joint, v, spec), x0, tol=tol, max_iter=max_iter)
    report = StationarityReport(s_star=x, gradient_norm=float(np.max(np.abs(g))), value=f, iterations=it)
    if spec.kind == "zlpr":
        report.t1, report.t2 = zlpr_decomposition(joint, x)
    return report


def bce_logodds_solution(joint):
    """Per-label log-odds of the marginals: where the BCE risk is minimised."""
    m = joint.marginals()
    if np.any((m <= 0) | (m >= 1)):
        raise ValueError("every marginal must lie strictly inside (0, 1)")
    return np.log(m) - np.log1p(-m)


def minimize_soft_zlpr(p, init=None, tol=1e-10, max_iter=100_000):
    """Minimise soft-ZLPR for a fixed soft target ``p``; returns ``(s*, max|grad|)``."""
    p = as_finite(p, "p")
    x0 = np.zeros_like(p) if init is None else as_finite(init, "init")

    def fun(v):
        r = soft_zlpr(p, v)
        return r.value, r.gradient

    x, _, g, _ = gradient_descent(fun, x0, tol=tol, max_iter=max_iter)
    return x, float(np.max(np.abs(g)))


__all__ = [
    "BUILTIN_JOINTS",
    "JointLabelDistribution",
    "LossSpec",
    "StationarityReport",
    "bce_logodds_solution",
    "builtin_joint",
    "configurations",
    "expected_loss",
    "gradient_descent",
    "load_joint",
    "minimize_expected_loss",
    "minimize_soft_zlpr",
    "product_joint",
    "prototype_joint",
    "save_joint",
    "zlpr_decomposition",
]
