"""Slow pure-Python reference implementations, written independently of the package."""

import itertools
import math


def f1_pair(t, p):
    tp = sum(a and b for a, b in zip(t, p))
    size = sum(t) + sum(p)
    return 1.0 if size == 0 else 2.0 * tp / size


def rank_of(scores):
    """1-based descending rank; ties broken by lower index."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ranks = [0] * len(scores)
    for r, i in enumerate(order, start=1):
        ranks[i] = r
    return ranks


def metrics_oracle(truth, pred, scores):
    """Dict of the six metrics, computed with explicit loops."""
    truth = [[int(v) for v in row] for row in truth]
    pred = [[int(v) for v in row] for row in pred]
    scores = [[float(v) for v in row] for row in scores]
    n, L = len(truth), len(truth[0])
    sub = sum(t == p for t, p in zip(truth, pred)) / n
    mlc = sum(f1_pair(t, p) for t, p in zip(truth, pred)) / n

    macro_terms = []
    TP = FP = FN = 0
    for j in range(L):
        tp = sum(truth[i][j] and pred[i][j] for i in range(n))
        fp = sum((not truth[i][j]) and pred[i][j] for i in range(n))
        fn = sum(truth[i][j] and not pred[i][j] for i in range(n))
        TP, FP, FN = TP + tp, FP + fp, FN + fn
        den = 2 * tp + fp + fn
        macro_terms.append(1.0 if den == 0 else 2 * tp / den)
    macro = sum(macro_terms) / L
    micro = 1.0 if 2 * TP + FP + FN == 0 else 2 * TP / (2 * TP + FP + FN)

    ap_terms, rl_terms = [], []
    for t, s in zip(truth, scores):
        pos = [j for j in range(L) if t[j]]
        neg = [j for j in range(L) if not t[j]]
        r = rank_of(s)
        if pos:
            ap_terms.append(sum(sum(1 for k in pos if r[k] <= r[j]) / r[j] for j in pos) / len(pos))
        if pos and neg:
            bad = sum(1 for a, b in itertools.product(pos, neg) if r[a] > r[b])
            rl_terms.append(bad / (len(pos) * len(neg)))
    return {
        "sub_acc": sub,
        "mlc_f1": mlc,
        "macro_f1": macro,
        "micro_f1": micro,
        "avg_prec": sum(ap_terms) / len(ap_terms) if ap_terms else None,
        "rank_loss": sum(rl_terms) / len(rl_terms) if rl_terms else None,
        "skipped_avgprec": n - len(ap_terms),
        "skipped_rankloss": n - len(rl_terms),
    }


def zlpr_loop(y, s):
    pos = 1.0 + sum(math.exp(-v) for v, t in zip(s, y) if t)
    neg = 1.0 + sum(math.exp(v) for v, t in zip(s, y) if not t)
    return math.log(pos) + math.log(neg)


def bce_loop(y, s):
    total = 0.0
    for v, t in zip(s, y):
        total += math.log1p(math.exp(-v)) if t else math.log1p(math.exp(v))
    return total


def expected_by_enumeration(L, prob_of_mask, loss, s):
    """sum over all 2^L bitmasks of P(mask) * loss(y(mask), s)."""
    return math.fsum(
        prob_of_mask(m) * loss([(m >> i) & 1 for i in range(L)], s) for m in range(2**L)
    )
