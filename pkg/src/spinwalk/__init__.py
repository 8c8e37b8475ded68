"""Event-driven Monte Carlo for random walks in dynamic spin-flip environments."""

from .kernels import BACKEND
from .ratespec import InitialLaw, RateSpec, SpinConfig, compute_M_epsilon, tr_scan

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "RateSpec",
    "SpinConfig",
    "InitialLaw",
    "tr_scan",
    "compute_M_epsilon",
    "__version__",
]
