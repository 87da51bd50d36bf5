"""Simulation and analytics for the alpha-Heston stochastic volatility model."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AlphaHestonError, BlowUpError, ConeExitError, DivergenceError, DomainError,
    NotSupportedError, ValidationError,
)
from .params import FIGURE2, FIGURE3, BranchingParams, JumpThreshold, ModelParams, SimGrid  # noqa: E402

__all__ = [
    "__version__", "AlphaHestonError", "BlowUpError", "ConeExitError", "DivergenceError",
    "DomainError", "NotSupportedError", "ValidationError", "FIGURE2", "FIGURE3",
    "BranchingParams", "JumpThreshold", "ModelParams", "SimGrid",
]
