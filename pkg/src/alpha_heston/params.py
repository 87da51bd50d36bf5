"""Parameter containers for the alpha-Heston model.

Units follow the usual Heston conventions: ``a`` and ``r`` are rates (1/time),
``b`` and ``V0`` are variance levels, ``sigma`` and ``sigma_N`` are vol-of-vol
coefficients for the Brownian and the stable part of the variance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from .errors import DomainError, ValidationError


def check_alpha(alpha: float) -> float:
    """Return ``alpha`` as a float, raising if it is not in (1, 2]."""
    alpha = float(alpha)
    if not (1.0 < alpha <= 2.0):
        raise DomainError(f"stability index alpha must lie in (1, 2], got {alpha}")
    return alpha


def is_gaussian(alpha: float) -> bool:
    # alpha = 2 is the Brownian limit; every stable formula needs its own branch there
    return alpha >= 2.0


@dataclass(frozen=True)
class BranchingParams:
    """Coefficients of the branching mechanism (a, sigma, sigma_N, alpha)."""

    a: float
    sigma: float
    sigma_N: float
    alpha: float

    def __post_init__(self):
        check_alpha(self.alpha)
        for name in ("a", "sigma", "sigma_N"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class JumpThreshold:
    """Jump-size threshold ``y`` and its scaled version ``y_bar = y / sigma_N``."""

    y: float
    y_bar: float

    @classmethod
    def from_y(cls, y: float, sigma_N: float) -> "JumpThreshold":
        if y <= 0:
            raise DomainError("jump threshold y must be positive")
        if sigma_N <= 0:
            raise DomainError("a jump threshold needs sigma_N > 0")
        return cls(float(y), float(y) / float(sigma_N))


def model_violations(r=0.0, a=0.0, b=0.0, sigma=0.0, sigma_N=0.0, alpha=1.5,
                     rho=0.0, S0=1.0, V0=0.0) -> list[str]:
    """Every violated parameter constraint, as human-readable strings."""
    out = []
    values = dict(r=r, a=a, b=b, sigma=sigma, sigma_N=sigma_N, alpha=alpha,
                  rho=rho, S0=S0, V0=V0)
    for name, value in values.items():
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            out.append(f"{name}: must be a finite number, got {value!r}")
    if out:
        return out
    if not (1.0 < alpha <= 2.0):
        out.append(f"alpha: stability index must lie in (1, 2], got {alpha}")
    for name in ("a", "b", "sigma", "sigma_N", "V0"):
        if values[name] < 0:
            out.append(f"{name}: must be nonnegative, got {values[name]}")
    if not (-1.0 < rho < 1.0):
        out.append(f"rho: correlation must lie strictly inside (-1, 1), got {rho}")
    if S0 <= 0:
        out.append(f"S0: initial price must be positive, got {S0}")
    return out


@dataclass(frozen=True)
class ModelParams:
    """Risk-neutral parameter set of the alpha-Heston model."""

    r: float = 0.0
    a: float = 5.0
    b: float = 0.14
    sigma: float = 0.08
    sigma_N: float = 1.0
    alpha: float = 1.26
    rho: float = 0.0
    S0: float = 1.0
    V0: float = 0.03

    def __post_init__(self):
        problems = model_violations(**asdict(self))
        if problems:
            raise ValidationError(problems)

    @property
    def branching(self) -> BranchingParams:
        return BranchingParams(self.a, self.sigma, self.sigma_N, self.alpha)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def feller(self) -> bool:
        from .levy import feller_check

        return feller_check(self.a, self.b, self.sigma, self.sigma_N, self.alpha)


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid for path simulation.

    ``small_jump_cutoff`` is the absolute jump size (variance units) above which
    every jump is simulated individually and written to the jump ledger.
    ``relative_cutoff`` additionally lowers the per-step cutoff to
    ``relative_cutoff * V`` when the state is small, which keeps the Gaussian
    small-jump approximation accurate near zero.
    """

    t_end: float
    n_steps: int
    small_jump_cutoff: float = 1e-3
    relative_cutoff: float = 0.1

    def __post_init__(self):
        if not (self.t_end > 0):
            raise DomainError("t_end must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps <= 0:
            raise DomainError("n_steps must be a positive integer")
        if not (self.small_jump_cutoff > 0):
            raise DomainError("small_jump_cutoff must be positive")
        if not (0 < self.relative_cutoff <= 1):
            raise DomainError("relative_cutoff must lie in (0, 1]")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @classmethod
    def with_dt(cls, t_end: float, dt: float, **kw) -> "SimGrid":
        return cls(t_end, max(1, int(round(t_end / dt))), **kw)

    def times(self):
        import numpy as np

        return np.linspace(0.0, self.t_end, self.n_steps + 1)


FIGURE2 = ModelParams(r=0.0, a=5.0, b=0.14, sigma=0.08, sigma_N=1.0, alpha=1.26,
                      rho=0.0, S0=1.0, V0=0.03)
FIGURE3 = ModelParams(r=0.0, a=5.0, b=0.144, sigma=0.08, sigma_N=1.0, alpha=1.26,
                      rho=-0.5, S0=1.0, V0=0.0332)

__all__ = [
    "BranchingParams", "JumpThreshold", "ModelParams", "SimGrid",
    "check_alpha", "is_gaussian", "model_violations", "FIGURE2", "FIGURE3",
]
