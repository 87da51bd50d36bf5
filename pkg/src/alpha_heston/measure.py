"""Esscher-type change from the risk-neutral to the physical measure.

Under the tilt ``(eta, eta_bar, theta)`` the model stays in the same affine
class: the vol-of-vol parameters are unchanged, the mean-reversion speed
becomes ``a_P = a - sigma eta - alpha sigma_N theta^(alpha-1) / cos(pi alpha/2)``
with ``a_P b_P = a b``, and the Levy density is tempered by ``exp(-theta zeta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotSupportedError, ValidationError
from .levy import levy_density
from .params import ModelParams, SimGrid, check_alpha, is_gaussian


@dataclass(frozen=True)
class EsscherParams:
    eta: float = 0.0
    eta_bar: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.theta < 0:
            raise DomainError("theta must be nonnegative")


def _jump_tilt(q: ModelParams, theta: float) -> float:
    """``alpha sigma_N theta^(alpha-1) / cos(pi alpha / 2)`` (nonpositive)."""
    if theta == 0.0 or q.sigma_N == 0.0:
        return 0.0
    al = q.alpha
    cos = -1.0 if is_gaussian(al) else math.cos(math.pi * al / 2.0)
    return al * q.sigma_N * theta ** (al - 1.0) / cos


@dataclass(frozen=True)
class PhysicalModel:
    """Physical parameter set plus the tempering of the jump measure."""

    params_P: ModelParams
    tempering: float
    drift_coeffs: tuple[float, float]

    def price_drift(self, v):
        """``mu_P = r + c v`` where ``(r, c) = drift_coeffs``."""
        r, c = self.drift_coeffs
        return r + c * np.asarray(v, dtype=float)

    def simulate_v_path(self, g: SimGrid, rng):
        """Simulate ``V`` under the physical measure (untempered case only)."""
        if self.tempering > 0:
            raise NotSupportedError("simulation under a tempered jump measure is not implemented")
        from .sde import simulate_v_path

        return simulate_v_path(self.params_P, g, rng)


def to_physical(q: ModelParams, e: EsscherParams) -> PhysicalModel:
    """Map risk-neutral parameters to the physical measure.

    Raises
    ------
    ValidationError
        If the physical mean-reversion speed is not positive.
    """
    a_P = q.a - q.sigma * e.eta - _jump_tilt(q, e.theta)
    if not a_P > 0:
        raise ValidationError([f"a_P: physical mean reversion must be positive, got {a_P}"])
    b_P = q.a * q.b / a_P
    params = q.with_(a=a_P, b=b_P)
    c = -(q.rho * e.eta + math.sqrt(1.0 - q.rho ** 2) * e.eta_bar)
    return PhysicalModel(params, float(e.theta), (q.r, c))


def risk_premiums(v, q: ModelParams, e: EsscherParams):
    """``(lambda_S, lambda_V)``, both linear in the variance level ``v``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError("v must be nonnegative")
    lam_s = -(q.rho * e.eta + math.sqrt(1.0 - q.rho ** 2) * e.eta_bar) * v
    lam_v = -(q.sigma * e.eta + _jump_tilt(q, e.theta)) * v
    if v.ndim == 0:
        return lam_s.item(), lam_v.item()
    return lam_s, lam_v


def tempered_density(zeta, alpha: float, theta: float):
    """``exp(-theta zeta) nu_alpha(zeta)``."""
    check_alpha(alpha)
    if theta < 0:
        raise DomainError("theta must be nonnegative")
    zeta = np.asarray(zeta, dtype=float)
    out = levy_density(alpha, zeta) * np.exp(-theta * zeta)
    return out.item() if np.ndim(out) == 0 else out
