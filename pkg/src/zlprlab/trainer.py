"""Linear multi-label scorer trained with Adam through any loss in :mod:`zlprlab.losses`.

The training loss of a batch is the mean of the per-sample losses (``dice2``
is a batch quantity and is used directly). Training is deterministic given
``init_seed`` and ``shuffle_seed``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import RNG_NAME, batch_indices, make_rng
from .errors import NumericalError, SchemaError, UsageError
from .losses import RANK_ONLY_KINDS, DecisionRule, LossSpec, batch_loss, decide
from .metrics import MetricsReport, aggregate_report
from .regularization import smooth_labels

MODEL_FORMAT = "zlprlab-linear-v1"


@dataclass
class LinearModel:
    weights: np.ndarray  # (L, F)
    bias: np.ndarray  # (L,)

    @property
    def num_labels(self):
        return self.weights.shape[0]

    @property
    def num_features(self):
        return self.weights.shape[1]

    def params(self):
        return {"weights": self.weights, "bias": self.bias}


def init_model(num_features, num_labels, seed):
    """Weights uniform in [-1/sqrt(F), 1/sqrt(F)], zero bias."""
    bound = 1.0 / np.sqrt(num_features)
    w = make_rng(seed).uniform(-bound, bound, size=(num_labels, num_features))
    return LinearModel(w, np.zeros(num_labels))


def forward(model, features):
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != model.num_features:
        raise UsageError(f"expected {model.num_features} features, got {x.shape[-1]}")
    return x @ model.weights.T + model.bias


def backward(model, features, targets, spec, seed=None):
    """Batch loss and its gradients with respect to weights and bias.

    ``targets`` are multi-hot labels, or soft probabilities for ``soft_zlpr``.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    t = np.atleast_2d(targets)
    s = forward(model, x)
    res = batch_loss(spec, t, s, seed=seed)
    g = res.gradient
    return res.value, {"weights": g.T @ x, "bias": g.sum(axis=0)}


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(state, params, grads):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    t = state.step_count + 1
    m_new, v_new, out = {}, {}, {}
    for key, p in params.items():
        g = np.asarray(grads[key], dtype=np.float64)
        if g.shape != np.shape(p):
            raise UsageError(f"gradient for {key!r} has shape {g.shape}, parameter {np.shape(p)}")
        m = state.first_moment.get(key, np.zeros_like(g))
        v = state.second_moment.get(key, np.zeros_like(g))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        out[key] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        m_new[key], v_new[key] = m, v
    return out, replace(state, step_count=t, first_moment=m_new, second_moment=v_new)


@dataclass
class TrainConfig:
    loss: LossSpec = field(default_factory=LossSpec)
    epochs: int = 20
    batch_size: int = 32
    lr: float = 2e-4
    init_seed: int = 0
    shuffle_seed: int = 0
    decision_rule: DecisionRule | None = None  # None: chosen from the loss kind
    label_smoothing: float = 0.0  # soft_zlpr targets only

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise UsageError("epochs and batch_size must be >= 1")
        if not self.lr > 0:
            raise UsageError("lr must be positive")

    def to_dict(self):
        d = asdict(self)
        d["decision_rule"] = None if self.decision_rule is None else str(self.decision_rule)
        return d


def default_decision_rule(spec, train_ds):
    """Zero threshold for losses with an implicit threshold, s0 for TLPR,
    top-k at the rounded training label cardinality for rank-only losses."""
    if spec.kind == "tlpr":
        return DecisionRule("threshold", spec.s0)
    if spec.kind in RANK_ONLY_KINDS:
        k = int(np.clip(np.round(train_ds.cardinality()), 0, train_ds.num_labels))
        return DecisionRule("top_k", k)
    return DecisionRule()


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_reports: list = field(default_factory=list)
    decision_rule: str = "zero_threshold"

    @property
    def best_epoch(self):
        """1-based epoch with the highest validation SubACC (first on ties)."""
        if not self.val_reports:
            return None
        return int(np.argmax([r.sub_acc for r in self.val_reports])) + 1

    def to_records(self):
        rows = []
        for i, (loss, rep) in enumerate(zip(self.train_loss, self.val_reports), start=1):
            rows.append({"epoch": i, "train_loss": loss, "val": rep.to_dict()})
        return rows


def _targets(config, labels):
    if config.loss.kind == "soft_zlpr":
        return smooth_labels(labels, config.label_smoothing)
    return labels


def train(config, train_ds, val_ds):
    """Train a linear model; the last-epoch model is returned."""
    config.validate()
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise UsageError("training and validation sets must be non-empty")
    if (train_ds.num_features, train_ds.num_labels) != (val_ds.num_features, val_ds.num_labels):
        raise UsageError("training and validation sets have different dimensions")
    rule = config.decision_rule or default_decision_rule(config.loss, train_ds)
    model = init_model(train_ds.num_features, train_ds.num_labels, config.init_seed)
    params = model.params()
    state = AdamState(lr=config.lr)
    targets = _targets(config, train_ds.labels)
    history = TrainHistory(decision_rule=str(rule))
    for epoch in range(config.epochs):
        losses = []
        for b, idx in enumerate(batch_indices(len(train_ds), config.batch_size, config.shuffle_seed, epoch)):
            current = LinearModel(params["weights"], params["bias"])
            seed = (config.loss.rng_seed, epoch, b)
            value, grads = backward(current, train_ds.features[idx], targets[idx], config.loss, seed=seed)
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericalError("non-finite loss or gradient", epoch=epoch + 1, batch=b + 1)
            params, state = adam_step(state, params, grads)
            losses.append(value)
        model = LinearModel(params["weights"], params["bias"])
        history.train_loss.append(float(np.mean(losses)))
        history.val_reports.append(evaluate(model, val_ds, rule))
    return model, history


def predict(model, features, rule=DecisionRule()):
    return decide(forward(model, features), rule)


def evaluate(model, ds, rule=DecisionRule()):
    """Forward pass, decision rule, then every metric."""
    scores = forward(model, ds.features)
    return aggregate_report(ds.labels, decide(scores, rule), scores)


def save_model(model, path, provenance=None):
    """Write the model as one JSON object (row-major flattened weights)."""
    obj = {
        "format": MODEL_FORMAT,
        "num_features": model.num_features,
        "num_labels": model.num_labels,
        "weights": [float(v) for v in model.weights.ravel()],
        "bias": [float(v) for v in model.bias],
        "provenance": {"rng": RNG_NAME, **(provenance or {})},
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True) + "\n", encoding="utf-8")
    return Path(path)


def load_model(path):
    """Returns ``(model, provenance)``."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != MODEL_FORMAT:
        raise SchemaError(f"{path}: not a {MODEL_FORMAT} model file")
    f, L = int(obj["num_features"]), int(obj["num_labels"])
    w = np.array(obj["weights"], dtype=np.float64)
    b = np.array(obj["bias"], dtype=np.float64)
    if w.size != f * L or b.size != L:
        raise SchemaError(f"{path}: parameter sizes do not match {L}x{f}")
    return LinearModel(w.reshape(L, f), b), obj.get("provenance", {})


__all__ = [
    "AdamState",
    "LinearModel",
    "MetricsReport",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "backward",
    "default_decision_rule",
    "evaluate",
    "forward",
    "init_model",
    "load_model",
    "predict",
    "save_model",
    "train",
]
