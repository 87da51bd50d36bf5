"""Spectrally positive alpha-stable ingredients.

The driving process ``Z`` is a compensated, spectrally positive alpha-stable
Levy process normalised so that ``E[exp(-q Z_t)] = exp(-t q**alpha / cos(pi alpha / 2))``.
Its Levy measure is ``nu(dz) = C z**(-1-alpha) dz`` with
``C = -1 / (cos(pi alpha / 2) Gamma(-alpha))``, which is positive on (1, 2).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma

from .errors import DomainError
from .params import BranchingParams, check_alpha, is_gaussian


def _stable_alpha(alpha: float) -> float:
    alpha = check_alpha(alpha)
    if is_gaussian(alpha):
        raise DomainError("the Levy measure degenerates at alpha = 2; use the Gaussian branch")
    return alpha


def levy_constant(alpha: float) -> float:
    """``C`` in ``nu(dz) = C z^(-1-alpha) dz``."""
    alpha = _stable_alpha(alpha)
    return -1.0 / (math.cos(math.pi * alpha / 2.0) * gamma(-alpha))


def levy_density(alpha: float, zeta):
    """Density of the Levy measure at ``zeta > 0``."""
    c = levy_constant(alpha)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta <= 0):
        raise DomainError("the Levy density is defined for zeta > 0 only")
    out = c * zeta ** (-1.0 - alpha)
    return out.item() if out.ndim == 0 else out


def levy_tail_mass(alpha: float, y_bar):
    """``nu((y_bar, inf))``, the rate of jumps larger than ``y_bar`` per unit of V."""
    c = levy_constant(alpha)
    y_bar = np.asarray(y_bar, dtype=float)
    if np.any(y_bar <= 0):
        raise DomainError("y_bar must be positive")
    out = c * y_bar ** (-alpha) / alpha
    return out.item() if out.ndim == 0 else out


def theta_compensator(alpha: float, y_bar):
    """First moment of the Levy measure above ``y_bar``.

    Closed form ``(2/pi) alpha Gamma(alpha-1) sin(pi alpha/2) y_bar^(1-alpha)``;
    it vanishes at alpha = 2 where the model has no jump tail.
    """
    alpha = check_alpha(alpha)
    y_bar = np.asarray(y_bar, dtype=float)
    if np.any(y_bar <= 0):
        raise DomainError("y_bar must be positive")
    if is_gaussian(alpha):
        out = np.zeros_like(y_bar)
    else:
        out = (2.0 / math.pi) * alpha * gamma(alpha - 1.0) * math.sin(math.pi * alpha / 2.0) \
            * y_bar ** (1.0 - alpha)
    return out.item() if out.ndim == 0 else out


def levy_small_second_moment(alpha: float, y_bar):
    """``int_0^y_bar z^2 nu(dz)``, the variance rate of jumps below ``y_bar``."""
    c = levy_constant(alpha)
    y_bar = np.asarray(y_bar, dtype=float)
    out = c * y_bar ** (2.0 - alpha) / (2.0 - alpha)
    return out.item() if out.ndim == 0 else out


def psi_alpha(q, p: BranchingParams):
    """Branching mechanism ``a q + sigma^2 q^2 / 2 - sigma_N^alpha q^alpha / cos(pi alpha / 2)``."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DomainError("the branching mechanism is evaluated on q >= 0 only")
    if is_gaussian(p.alpha):
        out = p.a * q + (0.5 * p.sigma ** 2 + p.sigma_N ** 2) * q ** 2
    else:
        out = p.a * q + 0.5 * p.sigma ** 2 * q ** 2 \
            - p.sigma_N ** p.alpha * q ** p.alpha / math.cos(math.pi * p.alpha / 2.0)
    return out.item() if out.ndim == 0 else out


def sample_stable_increment(alpha: float, dt: float, rng: np.random.Generator, size=None):
    """Increments of ``Z`` over a step ``dt``.

    Chambers-Mallows-Stuck with skewness +1 and scale ``dt**(1/alpha)``: in
    the Samorodnitsky-Taqqu parametrisation ``S_alpha(s, 1, 0)`` has Laplace
    transform ``exp(-s**alpha q**alpha / cos(pi alpha / 2))`` and mean zero, which
    is exactly the law of ``Z_dt``. At alpha = 2 this is ``sqrt(2) * N(0, dt)``.
    """
    alpha = check_alpha(alpha)
    if dt <= 0:
        raise DomainError("dt must be positive")
    if is_gaussian(alpha):
        return math.sqrt(2.0 * dt) * rng.standard_normal(size)
    u = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    w = rng.standard_exponential(size)
    t = math.tan(math.pi * alpha / 2.0)
    shift = math.atan(t) / alpha
    scale = (1.0 + t * t) ** (1.0 / (2.0 * alpha))
    x = scale * np.sin(alpha * (u + shift)) / np.cos(u) ** (1.0 / alpha) \
        * (np.cos(u - alpha * (u + shift)) / w) ** ((1.0 - alpha) / alpha)
    return dt ** (1.0 / alpha) * x


def sample_pareto(alpha: float, y: float, rng: np.random.Generator, size=None):
    """Pareto(alpha, y) variates ``y * U**(-1/alpha)``, all strictly above ``y``."""
    u = 1.0 - rng.random(size)  # in (0, 1]
    out = y * u ** (-1.0 / alpha)
    # u == 1 would return y itself; nudge to keep the support open
    return np.maximum(out, np.nextafter(y, np.inf))


def sample_truncated_pareto(alpha: float, lo, hi, rng: np.random.Generator):
    """Pareto(alpha, lo) conditioned on being below ``hi`` (array arguments)."""
    lo = np.asarray(lo, dtype=float)
    u = rng.random(lo.shape)
    tail = (lo / hi) ** alpha
    return lo * (1.0 - u * (1.0 - tail)) ** (-1.0 / alpha)


def effective_params(a: float, b: float, sigma_N: float, alpha: float, y_bar: float):
    """Mean-reversion speed and level between large jumps: ``(a~, b~)`` with ``a~ b~ = a b``."""
    theta = theta_compensator(alpha, y_bar)
    a_tilde = a + sigma_N * theta
    if a_tilde == 0:
        return 0.0, b
    return a_tilde, a * b / a_tilde


def feller_check(a: float, b: float, sigma: float, sigma_N: float, alpha: float) -> bool:
    """Whether 0 is an inaccessible boundary for the variance."""
    alpha = check_alpha(alpha)
    if is_gaussian(alpha):
        return 2.0 * a * b >= sigma ** 2 + 2.0 * sigma_N ** 2
    return 2.0 * a * b >= sigma ** 2
