"""Asymptotic equivalents for tails, small balls and implied-volatility wings.

Every function returns the right-hand side of an equivalence ``f(u) ~ g(u)``,
never an exact probability.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .errors import DomainError
from .levy import levy_constant, psi_alpha
from .params import ModelParams, check_alpha, is_gaussian
from .riccati import vbar


def _expm1_ratio(x, t):
    """``-expm1(-x t) / x`` with its limit ``t`` at ``x = 0``."""
    if x == 0:
        return t
    return -math.expm1(-x * t) / x


def p_alpha(t: float, a: float, alpha: float) -> float:
    """``(e^{-a t} - e^{-alpha a t}) / (a (alpha - 1))``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    alpha = check_alpha(alpha)
    return math.exp(-a * t) * _expm1_ratio(a * (alpha - 1.0), t)


def q_alpha(t: float, a: float, b: float, alpha: float) -> float:
    """``b ((1 - e^{-alpha a t}) / (alpha a) - p_alpha(t))``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    return b * (_expm1_ratio(alpha * a, t) - p_alpha(t, a, alpha))


def tail_constant_v(t: float, x: float, p: ModelParams) -> float:
    """Constant ``K`` in ``P_x(V_t > u) ~ K u^{-alpha}``."""
    if is_gaussian(p.alpha):
        raise DomainError("no power-law tail at alpha = 2")
    pref = levy_constant(p.alpha) * p.sigma_N ** p.alpha / p.alpha
    return pref * (q_alpha(t, p.a, p.b, p.alpha) + p_alpha(t, p.a, p.alpha) * x)


def tail_v(u, t: float, x: float, p: ModelParams):
    """Asymptotic upper tail of ``V_t`` started at ``x``."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("u must be positive")
    out = tail_constant_v(t, x, p) * u ** (-p.alpha)
    return out.item() if out.ndim == 0 else out


def _correction_integral(v0: float, p: ModelParams) -> float:
    """``int_{v0}^inf (z / Psi(z) - 2 / (sigma^2 z)) dz`` (negative)."""
    bp = p.branching
    s2 = p.sigma ** 2

    def f(z):
        psi = psi_alpha(z, bp)
        # combine over a common denominator to avoid cancellation at large z
        return (s2 * z * z - 2.0 * psi) / (s2 * z * psi)

    val, _ = quad(f, v0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=400)
    return val


def small_ball_v_sigma_pos(u, t: float, x: float, p: ModelParams):
    """Asymptotic ``P_x(V_t <= u)`` as ``u -> 0`` when ``sigma > 0``."""
    if p.sigma <= 0:
        raise DomainError("sigma > 0 required; use log_small_ball_v_sigma_zero")
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("u must be positive")
    ab = p.a * p.b
    beta = 2.0 * ab / p.sigma ** 2
    vb = vbar(t, p)
    log_const = beta * math.log(vb) - math.lgamma(1.0 + beta) - x * vb \
        - ab * _correction_integral(vb, p)
    out = np.exp(beta * np.log(u) + log_const)
    return out.item() if out.ndim == 0 else out


def log_small_ball_v_sigma_zero(u, p: ModelParams):
    """Leading term of ``log P_x(V_t <= u)`` as ``u -> 0`` when ``sigma = 0``.

    It depends on neither ``t`` nor the starting point.
    """
    if p.sigma != 0:
        raise DomainError("this branch needs sigma = 0")
    if is_gaussian(p.alpha):
        raise DomainError("alpha must lie in (1, 2)")
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("u must be positive")
    al = p.alpha
    c = -p.a * p.b * math.cos(math.pi * al / 2.0)
    out = -((al - 1.0) / (2.0 - al)) * c ** (1.0 / (al - 1.0)) \
        * p.sigma_N ** (-al / (al - 1.0)) * u ** (-(2.0 - al) / (al - 1.0))
    return out.item() if out.ndim == 0 else out


def iota_alpha(t: float, x: float, p: ModelParams) -> float:
    """``e^{-alpha a t} int_0^t (b(1-e^{-as}) + x e^{-as}) (e^{at} - e^{as})^alpha ds``."""
    if t <= 0:
        raise DomainError("t must be positive")
    a, b, al = p.a, p.b, p.alpha

    def f(s):
        mean = b * (-math.expm1(-a * s)) + x * math.exp(-a * s)
        # (e^{at} - e^{as})^alpha e^{-alpha a t} = (1 - e^{-a(t-s)})^alpha
        return mean * (-math.expm1(-a * (t - s))) ** al

    val, _ = quad(f, 0.0, t, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def tail_constant_log_s(t: float, x: float, p: ModelParams) -> float:
    """Constant ``K`` in ``P_x(-log S_t > u) ~ K u^{-alpha}``."""
    if is_gaussian(p.alpha):
        raise DomainError("no power-law tail at alpha = 2")
    pref = levy_constant(p.alpha) / p.alpha * (p.sigma_N / (2.0 * p.a)) ** p.alpha
    return pref * iota_alpha(t, x, p)


def tail_log_s(u, t: float, x: float, p: ModelParams):
    """Asymptotic left tail of ``log S_t``: ``P_x(-log S_t > u)``."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("u must be positive")
    out = tail_constant_log_s(t, x, p) * u ** (-p.alpha)
    return out.item() if out.ndim == 0 else out


def lee_psi(q):
    """Lee's slope function ``2 - 4 (sqrt(q^2 + q) - q)``, decreasing from 2 to 0."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DomainError("q must be nonnegative")
    with np.errstate(invalid="ignore"):
        # sqrt(q^2+q) - q = q / (sqrt(q^2+q) + q), stable for large q
        diff = np.where(q > 0, q / (np.sqrt(q * q + q) + q), 0.0)
    out = np.where(np.isinf(q), 0.0, 2.0 - 4.0 * diff)
    return out.item() if out.ndim == 0 else out


def asset_wing_slope(T: float) -> float:
    """Wing slope ``2 / T`` of total implied variance per unit of ``|k|``."""
    if T <= 0:
        raise DomainError("T must be positive")
    return 2.0 / T


def asset_left_wing(k, T: float, alpha: float):
    """Two-term left-wing shape of the asset implied volatility (``k < -e``)."""
    k = np.asarray(k, dtype=float)
    if np.any(k >= -math.e):
        raise DomainError("the left-wing expansion needs k < -e")
    if T <= 0:
        raise DomainError("T must be positive")
    alpha = check_alpha(alpha)
    lk = np.log(-k)
    corr = alpha * lk - 0.5 * np.log(lk)
    out = math.sqrt(2.0 / T) * (np.sqrt(-k + corr) - np.sqrt(corr))
    return out.item() if out.ndim == 0 else out


def variance_right_wing(k, T: float, alpha: float):
    """``sqrt(lee_psi(alpha) k / T)``."""
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise DomainError("the right wing needs k > 0")
    if T <= 0:
        raise DomainError("T must be positive")
    out = np.sqrt(lee_psi(check_alpha(alpha)) * k / T)
    return out.item() if out.ndim == 0 else out


def variance_left_wing(k, T: float, p: ModelParams, put_price=None):
    """Left wing of the variance implied volatility.

    With ``sigma > 0`` this is ``sqrt(lee_psi(2ab/sigma^2) (-k) / T)``. With
    ``sigma = 0`` the shape involves the put price ``E[(e^k - V_T)_+]``, which
    must be supplied.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k >= 0):
        raise DomainError("the left wing needs k < 0")
    if T <= 0:
        raise DomainError("T must be positive")
    if p.sigma > 0:
        out = np.sqrt(lee_psi(2.0 * p.a * p.b / p.sigma ** 2) * (-k) / T)
    else:
        if put_price is None:
            raise DomainError("the sigma = 0 branch needs the put price")
        put_price = np.asarray(put_price, dtype=float)
        if np.any(put_price <= 0) or np.any(put_price >= np.exp(k)):
            raise DomainError("put price must lie in (0, e^k)")
        out = (-k) * np.sqrt(np.log(np.exp(k) / put_price)) / math.sqrt(2.0 * T)
    return out.item() if out.ndim == 0 else out


def put_tail_constant(T: float, x: float, p: ModelParams) -> float:
    """``K`` in the deep out-of-the-money put asymptotic ``P(e^k) ~ K e^k |k|^{-alpha}``."""
    return tail_constant_log_s(T, x, p)


__all__ = [
    "p_alpha", "q_alpha", "tail_constant_v", "tail_v", "small_ball_v_sigma_pos",
    "log_small_ball_v_sigma_zero", "iota_alpha", "tail_constant_log_s", "tail_log_s",
    "lee_psi", "asset_wing_slope", "asset_left_wing", "variance_right_wing",
    "variance_left_wing", "put_tail_constant",
]
