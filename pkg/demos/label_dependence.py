"""
Where the risk minimiser sits
=============================

With every label configuration enumerated, the expected loss can be
minimised exactly. BCE lands on the per-label log-odds no matter how the
labels co-occur. ZLPR's optimum moves when the co-occurrence changes.
"""

import numpy as np

from zlprlab.losses import LossSpec
from zlprlab.risk import (
    bce_logodds_solution,
    builtin_joint,
    minimize_expected_loss,
    product_joint,
)

# two labels that mostly appear together
joint = builtin_joint("coupled_2")
print("P(config) for bitmasks 00, 10, 01, 11:", joint.probs)
print("marginals:", joint.marginals())

bce_rep = minimize_expected_loss(joint, LossSpec("bce"))
print("BCE optimum      ", bce_rep.s_star, " log-odds", bce_logodds_solution(joint))

rep = minimize_expected_loss(joint, LossSpec("zlpr"))
print("ZLPR optimum     ", rep.s_star)
print("  marginal part  ", rep.t1)
print("  coupling part  ", rep.t2)
print("  (t1 + t2) / 2  ", 0.5 * (rep.t1 + rep.t2))

# same marginals, independent labels: BCE does not move, ZLPR does
indep = product_joint(joint.marginals())
print("independent, BCE ", minimize_expected_loss(indep, LossSpec("bce")).s_star)
print("independent, ZLPR", minimize_expected_loss(indep, LossSpec("zlpr")).s_star)

# only the sign pattern matters for the prediction
print("ZLPR predicts both labels:", np.all(rep.s_star > 0))
