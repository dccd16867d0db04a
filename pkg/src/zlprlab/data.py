"""Datasets: JSON-lines files, seeded synthetic generators, 8:1:1 splits, batching.

Randomness
----------
Every random draw goes through :func:`make_rng`, a numpy ``Generator`` over
the Philox-4x64-10 counter-based bit generator, keyed by
``numpy.random.SeedSequence(seed)``. ``seed`` may be an int or a tuple of
ints; the per-epoch batch shuffles use ``(shuffle_seed, epoch)``.

File format
-----------
Line 1 is a header object ``{"name": ..., "num_features": F, "num_labels": L}``.
Each following line is ``{"features": [F floats], "labels": [sorted positive indices]}``.
Floats are written with ``repr`` precision so a save/load round trip is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError, UsageError
from .risk import JointLabelDistribution

RNG_NAME = "numpy.random.Philox (Philox-4x64-10) keyed by numpy.random.SeedSequence"


def make_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.uint8)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise SchemaError(f"features {x.shape} and labels {y.shape} are not aligned (N, F) / (N, L)")
        if y.shape[1] < 1:
            raise SchemaError("need at least one label")
        if not np.all(np.isfinite(x)):
            raise SchemaError("features must be finite")
        if not np.all(y <= 1):
            raise SchemaError("labels must be 0/1")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.features.shape == other.features.shape
            and self.labels.shape == other.labels.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    @property
    def num_features(self):
        return self.features.shape[1]

    @property
    def num_labels(self):
        return self.labels.shape[1]

    def subset(self, index, name=None):
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.features[index], self.labels[index], name or self.name)

    def cardinality(self):
        """Mean number of positive labels per example."""
        return float(self.labels.sum(axis=1).mean())


@dataclass
class SyntheticSpec:
    """Parameters of a synthetic multi-label task.

    ``independent``: each label is the sign of its own noisy linear function
    of the features. ``coupled``: every label configuration is assigned to
    one of ``clusters`` latent clusters; a configuration is drawn from
    ``coupling`` and the features from its cluster's Gaussian, so the label
    set given x follows the coupling table restricted to that cluster.
    """

    mode: str = "independent"
    num_features: int = 16
    num_labels: int = 8
    sample_count: int = 1000
    noise_std: float = 0.0
    coupling: JointLabelDistribution | None = None
    clusters: int = 8
    name: str = field(default="synthetic")

    def validate(self):
        if self.mode not in ("independent", "coupled"):
            raise UsageError(f"mode must be 'independent' or 'coupled', got {self.mode!r}")
        if self.num_features < 1 or self.num_labels < 1 or self.sample_count < 1:
            raise UsageError("num_features, num_labels and sample_count must be >= 1")
        if not (np.isfinite(self.noise_std) and self.noise_std >= 0):
            raise UsageError("noise_std must be finite and nonnegative")
        if self.mode == "coupled":
            if self.coupling is None:
                raise UsageError("coupled mode needs a coupling table")
            if self.coupling.label_count != self.num_labels:
                raise UsageError(
                    f"coupling table has L={self.coupling.label_count}, spec has L={self.num_labels}"
                )
            if self.clusters < 1:
                raise UsageError("clusters must be >= 1")


def _standardize(x):
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - mu) / sd


def generate_synthetic(spec, seed):
    """Deterministic dataset from ``(spec, seed)``; features are standardized per column."""
    spec.validate()
    rng = make_rng(seed)
    n, f, L = spec.sample_count, spec.num_features, spec.num_labels
    if spec.mode == "independent":
        w = rng.standard_normal((L, f)) / np.sqrt(f)
        x = _standardize(rng.standard_normal((n, f)))
        noise = rng.standard_normal((n, L)) * spec.noise_std
        y = (x @ w.T + noise > 0).astype(np.uint8)
    else:
        joint = spec.coupling
        assignment = rng.integers(spec.clusters, size=len(joint.probs))
        centers = rng.standard_normal((spec.clusters, f))
        masks = joint.sample(n, rng)
        x = centers[assignment[masks]] + spec.noise_std * rng.standard_normal((n, f))
        x = _standardize(x)
        y = ((masks[:, None] >> np.arange(L)) & 1).astype(np.uint8)
    return Dataset(x, y, spec.name)


def save_dataset(ds, path):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        header = {"name": ds.name, "num_features": ds.num_features, "num_labels": ds.num_labels}
        fh.write(json.dumps(header) + "\n")
        for x, y in zip(ds.features, ds.labels):
            rec = {"features": [float(v) for v in x], "labels": np.flatnonzero(y).tolist()}
            fh.write(json.dumps(rec) + "\n")
    return path


def load_dataset(path):
    """Read a dataset file; errors name the offending line."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
        f, L = int(header["num_features"]), int(header["num_labels"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad header: {exc}", 1) from None
    if f < 1 or L < 1:
        raise SchemaError("num_features and num_labels must be >= 1", 1)
    xs, ys = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            feats = [float(v) for v in rec["features"]]
            idx = [int(v) for v in rec["labels"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"malformed record: {exc}", lineno) from None
        if len(feats) != f:
            raise SchemaError(f"expected {f} features, got {len(feats)}", lineno)
        if not np.all(np.isfinite(feats)):
            raise SchemaError("non-finite feature", lineno)
        if any(i < 0 or i >= L for i in idx):
            raise SchemaError(f"label index out of range 0..{L - 1}: {idx}", lineno)
        if len(set(idx)) != len(idx):
            raise SchemaError(f"repeated label index: {idx}", lineno)
        y = np.zeros(L, dtype=np.uint8)
        y[idx] = 1
        xs.append(feats)
        ys.append(y)
    x = np.array(xs, dtype=np.float64).reshape(len(xs), f)
    y = np.array(ys, dtype=np.uint8).reshape(len(ys), L)
    return Dataset(x, y, str(header.get("name", path.stem)))


def split(ds, seed):
    """Seeded shuffle, then contiguous 80/10/10 cut (floor for val and test)."""
    n = len(ds)
    if n < 10:
        raise UsageError(f"need at least 10 examples to split, got {n}")
    perm = make_rng(seed).permutation(n)
    n_val = n_test = n // 10
    n_train = n - n_val - n_test
    return (
        ds.subset(perm[:n_train], f"{ds.name}/train"),
        ds.subset(perm[n_train : n_train + n_val], f"{ds.name}/val"),
        ds.subset(perm[n_train + n_val :], f"{ds.name}/test"),
    )


def batch_indices(n, batch_size, shuffle_seed, epoch):
    """Index arrays for one epoch; the last batch may be short."""
    if batch_size < 1:
        raise UsageError("batch_size must be >= 1")
    perm = make_rng((int(shuffle_seed), int(epoch))).permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def batch_iterator(ds, batch_size, shuffle_seed, epoch=0):
    """Yield ``(features, labels)`` batches for one epoch."""
    for idx in batch_indices(len(ds), batch_size, shuffle_seed, epoch):
        yield ds.features[idx], ds.labels[idx]
