"""Multi-label loss laboratory built around the ZLPR loss.

Submodules: :mod:`numerics`, :mod:`losses`, :mod:`regularization`,
:mod:`metrics`, :mod:`risk`, :mod:`data`, :mod:`trainer`, :mod:`cli`.
"""

from .losses import KINDS, DecisionRule, LossResult, LossSpec, compute_loss, decide, zlpr
from .metrics import MetricsReport, aggregate_report

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "DecisionRule",
    "LossResult",
    "LossSpec",
    "MetricsReport",
    "__version__",
    "aggregate_report",
    "compute_loss",
    "decide",
    "zlpr",
]
