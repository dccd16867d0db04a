"""
ZLPR in a few lines
===================

The loss pushes every positive score above 0 and every negative score
below 0, and pays for the worst offender on each side.
"""

import numpy as np

from zlprlab import decide, zlpr
from zlprlab.losses import bce

# three categories, the first two are relevant
y = np.array([1, 1, 0])
s = np.array([1.0, -1.0, 0.5])

r = zlpr(y, s)
print("zlpr value   ", r.value)
print("zlpr gradient", r.gradient)
print("bce value    ", bce(y, s).value)

# the prediction is the set of positive scores; no threshold to tune
print("predicted set", np.flatnonzero(decide(s)))

# scale the scores up: the loss approaches the largest margin violation
M = max(0.0, s[y == 0].max()) - min(0.0, s[y == 1].min())
for beta in (1, 10, 100, 1000):
    print(f"beta={beta:>5}  zlpr(beta*s)/beta = {zlpr(y, beta * s).value / beta:.6f}   M = {M}")

# an empty target set is fine: the positive term vanishes
print("empty target ", zlpr([0, 0, 0], s).value)
