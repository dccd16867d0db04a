"""The six evaluation measures: SubACC, MLC-F1, Macro-F1, Micro-F1, AvgPrec, RankLoss.

Record sets are passed as aligned ``(N, L)`` arrays: ``truth`` and
``predicted`` multi-hot, ``scores`` real. Degenerate cases:

* an example with both predicted and true sets empty has F1 = 1;
* a label with TP = FP = FN = 0 contributes 1 to Macro-F1;
* AvgPrec skips examples with no true label; RankLoss also skips examples
  whose true set is the full category set. Skip counts are reported.

RankLoss is normalised by |y| * |L \\ y|, the size of the pair domain it
counts over.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import UndefinedMetricError, UsageError
from .numerics import as_finite, descending_ranks

# Display order used in tables (matches the usual per-loss result layout).
METRIC_COLUMNS = (
    ("sub_acc", "SubACC"),
    ("mlc_f1", "MLC-F1"),
    ("micro_f1", "Micro-F1"),
    ("macro_f1", "Macro-F1"),
    ("avg_prec", "AvgPrec"),
    ("rank_loss", "RankLoss"),
)
LOWER_IS_BETTER = frozenset({"rank_loss"})


@dataclass
class EvaluationRecord:
    truth: np.ndarray
    predicted: np.ndarray
    scores: np.ndarray


@dataclass
class MetricsReport:
    sub_acc: float
    mlc_f1: float
    macro_f1: float
    micro_f1: float
    avg_prec: float
    rank_loss: float
    skipped_avgprec: int = 0
    skipped_rankloss: int = 0

    def to_dict(self):
        return asdict(self)


def _labels(a, name):
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise UsageError(f"{name} must be (N, L)")
    if not np.all((a == 0) | (a == 1)):
        raise UsageError(f"{name} must be 0/1")
    return a.astype(bool)


def _scores(s):
    s = as_finite(s, "scores")
    return s[None, :] if s.ndim == 1 else s


def _nonempty(*arrays):
    n = arrays[0].shape[0]
    for a in arrays:
        if a.shape != arrays[0].shape:
            raise UsageError(f"shape mismatch {a.shape} vs {arrays[0].shape}")
    if n == 0:
        raise UsageError("empty record set")


def rank_categories(s):
    """Rank 1 for the highest score; ties go to the lower index first."""
    return descending_ranks(as_finite(s, "scores"))


def subset_accuracy(truth, predicted):
    t, p = _labels(truth, "truth"), _labels(predicted, "predicted")
    _nonempty(t, p)
    return float(np.mean(np.all(t == p, axis=1)))


def example_f1(truth, predicted):
    t, p = _labels(truth, "truth"), _labels(predicted, "predicted")
    _nonempty(t, p)
    inter = (t & p).sum(axis=1)
    size = t.sum(axis=1) + p.sum(axis=1)
    f1 = np.where(size == 0, 1.0, 2.0 * inter / np.maximum(size, 1))
    return float(np.mean(f1))


def confusion_counts(truth, predicted):
    """Per-label (TP, FP, FN) integer counts."""
    t, p = _labels(truth, "truth"), _labels(predicted, "predicted")
    _nonempty(t, p)
    tp = (t & p).sum(axis=0)
    fp = (~t & p).sum(axis=0)
    fn = (t & ~p).sum(axis=0)
    return tp, fp, fn


def label_f1s(truth, predicted):
    """(macro, micro) label-based F1."""
    tp, fp, fn = confusion_counts(truth, predicted)
    den = 2 * tp + fp + fn
    per_label = np.where(den == 0, 1.0, 2.0 * tp / np.maximum(den, 1))
    macro = float(np.mean(per_label))
    pooled = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = 1.0 if pooled == 0 else float(2 * tp.sum() / pooled)
    return macro, micro


def _average_precision(t, s):
    ranks = descending_ranks(s)
    keep = t.any(axis=1)
    t, ranks = t[keep], ranks[keep]
    if t.shape[0] == 0:
        return None, int((~keep).sum())
    # For a true label at rank r, count true labels ranked at or above r.
    pos_ranks = np.where(t, ranks, np.iinfo(np.int64).max)
    above = (pos_ranks[:, None, :] <= pos_ranks[:, :, None]).sum(axis=2)
    prec = np.where(t, above / ranks, 0.0).sum(axis=1) / t.sum(axis=1)
    return float(np.mean(prec)), int((~keep).sum())


def average_precision(truth, scores):
    t, s = _labels(truth, "truth"), _scores(scores)
    _nonempty(t, s)
    value, _ = _average_precision(t, s)
    if value is None:
        raise UndefinedMetricError("average precision undefined: no record has a true label")
    return value


def _ranking_loss(t, s):
    ranks = descending_ranks(s)
    n_pos = t.sum(axis=1)
    keep = (n_pos > 0) & (n_pos < t.shape[1])
    if not keep.any():
        return None, int((~keep).sum())
    t, ranks, n_pos = t[keep], ranks[keep], n_pos[keep]
    pairs = t[:, :, None] & ~t[:, None, :]
    wrong = pairs & (ranks[:, :, None] > ranks[:, None, :])
    frac = wrong.sum(axis=(1, 2)) / (n_pos * (t.shape[1] - n_pos))
    return float(np.mean(frac)), int((~keep).sum())


def ranking_loss_metric(truth, scores):
    t, s = _labels(truth, "truth"), _scores(scores)
    _nonempty(t, s)
    value, _ = _ranking_loss(t, s)
    if value is None:
        raise UndefinedMetricError("ranking loss undefined: every record has an empty or full label set")
    return value


def aggregate_report(truth, predicted, scores):
    """All six metrics plus the AvgPrec/RankLoss skip counts."""
    t, p, s = _labels(truth, "truth"), _labels(predicted, "predicted"), _scores(scores)
    _nonempty(t, p, s)
    macro, micro = label_f1s(t, p)
    ap, skip_ap = _average_precision(t, s)
    rl, skip_rl = _ranking_loss(t, s)
    if ap is None:
        raise UndefinedMetricError("average precision undefined: no record has a true label")
    if rl is None:
        raise UndefinedMetricError("ranking loss undefined: every record has an empty or full label set")
    return MetricsReport(
        sub_acc=subset_accuracy(t, p),
        mlc_f1=example_f1(t, p),
        macro_f1=macro,
        micro_f1=micro,
        avg_prec=ap,
        rank_loss=rl,
        skipped_avgprec=skip_ap,
        skipped_rankloss=skip_rl,
    )


def report_from_records(records):
    """aggregate_report over a sequence of :class:`EvaluationRecord`."""
    records = list(records)
    if not records:
        raise UsageError("empty record set")
    return aggregate_report(
        np.stack([r.truth for r in records]),
        np.stack([r.predicted for r in records]),
        np.stack([r.scores for r in records]),
    )
