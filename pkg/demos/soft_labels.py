"""
Soft targets and score divergences
==================================

Feeding probabilities instead of 0/1 targets, the minimiser satisfies
sigmoid(2 s) = p, which gives scores a probabilistic reading. The same
map defines a KL divergence between two score vectors.
"""

import numpy as np

from zlprlab.regularization import (
    kl_divergence,
    score_to_probability,
    smooth_labels,
    symmetric_divergence,
)
from zlprlab.risk import minimize_soft_zlpr

p = np.array([0.9, 0.5, 0.2, 0.05])
s_star, grad = minimize_soft_zlpr(p)
print("target p         ", p)
print("minimising scores", s_star, f"(max|grad| {grad:.1e})")
print("sigmoid(2 s*)    ", score_to_probability(s_star))

# two-sided label smoothing turns hard labels into soft targets
print("smoothed", smooth_labels([1, 0, 1, 0], 0.1))

# divergence between two models' scores on one example
a = np.array([2.0, -1.0, 0.3])
b = np.array([1.5, -0.2, 0.3])
print("KL(a, b)", kl_divergence(a, b))
print("KL(b, a)", kl_divergence(b, a))
print("symmetric", symmetric_divergence(a, b))
