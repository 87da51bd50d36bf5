"""Affine transform layer.

The joint transform of ``(log S_T, V_T, int_0^T V ds)`` is

    E[exp(xi1 log S_T + xi2 V_T + xi3 int V)] = exp(xi1 log S0 + psi(T) V0 + phi(T))

where ``psi' = R(xi1, psi, xi3)``, ``phi' = F(xi1, psi)``, ``psi(0) = xi2``,
``phi(0) = 0``. The jump term ``(-psi)**alpha`` is only defined on the closed
left half-plane, so the flow is confined there and leaving it is reported as
a moment explosion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import BlowUpError, DivergenceError, DomainError
from .levy import psi_alpha
from .ode import dopri45
from .params import ModelParams, is_gaussian

PSI_CEILING = 1e8


@dataclass(frozen=True)
class FreqTriple:
    """Frequencies for log-price, variance and integrated variance."""

    xi1: complex = 0.0
    xi2: complex = 0.0
    xi3: complex = 0.0

    def __post_init__(self):
        x1 = complex(self.xi1)
        if not (x1.real == 0.0 or (x1.imag == 0.0)):
            raise DomainError("xi1 must be purely imaginary or real")
        if complex(self.xi2).real > 0 or complex(self.xi3).real > 0:
            raise DomainError("xi2 and xi3 need nonpositive real parts")


@dataclass(frozen=True)
class RiccatiSolution:
    psi_T: complex
    phi_T: complex
    n_steps_used: int
    est_error: float

    def transform(self, p: ModelParams, xi1: complex = 0.0) -> complex:
        """``exp(xi1 log S0 + psi V0 + phi)``."""
        return complex(np.exp(xi1 * math.log(p.S0) + self.psi_T * p.V0 + self.phi_T))


class Interval(NamedTuple):
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def __contains__(self, x) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below


def _jump_term(psi, p: ModelParams):
    if p.sigma_N == 0.0:
        return 0.0
    if is_gaussian(p.alpha):
        return p.sigma_N ** 2 * psi * psi
    return -p.sigma_N ** p.alpha * (-psi) ** p.alpha / math.cos(math.pi * p.alpha / 2.0)


def _R(xi1, xi3, psi, p: ModelParams):
    return 0.5 * (xi1 * xi1 - xi1) + p.rho * p.sigma * xi1 * psi \
        + 0.5 * p.sigma ** 2 * psi * psi - p.a * psi + _jump_term(psi, p) + xi3


def R_op(xi: FreqTriple, psi: complex, p: ModelParams) -> complex:
    """Riccati vector field for ``psi``; principal branch of ``(-psi)**alpha``."""
    psi = complex(psi)
    if psi.real > 0 and not is_gaussian(p.alpha):
        raise DomainError("R is defined for Re(psi) <= 0 only")
    return complex(_R(complex(xi.xi1), complex(xi.xi3), psi, p))


def F_op(xi: FreqTriple, psi: complex, p: ModelParams) -> complex:
    """``r xi1 + a b psi``."""
    return complex(p.r * complex(xi.xi1) + p.a * p.b * complex(psi))


def solve_riccati(xi: FreqTriple, T: float, p: ModelParams, tol: float = 1e-10) -> RiccatiSolution:
    """Solve the generalized Riccati system up to ``T``.

    Raises
    ------
    BlowUpError
        If ``|psi|`` exceeds ``PSI_CEILING`` before ``T``.
    ConeExitError
        If the flow is pushed out of ``Re(psi) <= 0`` (a blow-up as well,
        since the transform is infinite there).
    """
    if not (T > 0):
        raise DomainError("T must be positive")
    if not (tol > 0):
        raise DomainError("tol must be positive")
    x1, x3 = complex(xi.xi1), complex(xi.xi3)
    ab = p.a * p.b

    def rhs(y):
        psi = y[0]
        return np.array([_R(x1, x3, psi, p), p.r * x1 + ab * psi])

    admissible = None if is_gaussian(p.alpha) else (lambda y: y[0].real <= 0.0)
    res = dopri45(rhs, np.array([complex(xi.xi2), 0j]), T, rtol=tol, atol=tol * 1e-2,
                  admissible=admissible, ceiling=PSI_CEILING)
    return RiccatiSolution(complex(res.y[0]), complex(res.y[1]), res.n_steps, res.est_error)


def heston_closed_form(xi: FreqTriple, T: float, p: ModelParams) -> tuple[complex, complex]:
    """Closed-form ``(psi(T), phi(T))`` for the Gaussian (alpha = 2) model.

    Solves ``psi' = A + B psi + C psi**2`` with ``C = (sigma**2 + 2 sigma_N**2) / 2``.
    """
    if not is_gaussian(p.alpha):
        raise DomainError("closed form available for alpha = 2 only")
    x1, x2, x3 = complex(xi.xi1), complex(xi.xi2), complex(xi.xi3)
    A = 0.5 * (x1 * x1 - x1) + x3
    B = p.rho * p.sigma * x1 - p.a
    C = 0.5 * (p.sigma ** 2 + 2.0 * p.sigma_N ** 2)
    d = np.sqrt(B * B - 4.0 * A * C + 0j)
    if d.real < 0:
        d = -d
    r_minus = (-B - d) / (2.0 * C)
    r_plus = (-B + d) / (2.0 * C)
    g0 = (x2 - r_minus) / (x2 - r_plus)
    e = np.exp(-d * T)
    g = g0 * e
    psi = (r_minus - g * r_plus) / (1.0 - g)
    phi = p.r * x1 * T + p.a * p.b * (r_minus * T - np.log((1.0 - g) / (1.0 - g0)) / C)
    return complex(psi), complex(phi)


def laplace_v(lam: float, t: float, x: float, p: ModelParams, tol: float = 1e-11) -> float:
    """``E_x[exp(-lam V_t)]`` from ``v' = -Psi(v)``, ``v(0) = lam``.

    The integral of ``v`` is carried as a second state so both share one
    error control.
    """
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    if not (t > 0):
        raise DomainError("t must be positive")
    if lam == 0:
        return 1.0
    v, w = _branching_flow(lam, t, p, tol)
    return math.exp(-x * v - p.a * p.b * w)


def _branching_flow(lam, t, p, tol):
    bp = p.branching

    def rhs(y):
        return np.array([-psi_alpha(y[0], bp), y[0]])

    res = dopri45(rhs, np.array([float(lam), 0.0]), t, rtol=tol, atol=tol * 1e-3 * min(1.0, lam),
                  h0=min(t, 1e-3 / max(1.0, psi_alpha(lam, bp) / lam)),
                  admissible=lambda y: y[0] >= 0.0)
    return float(res.y[0]), float(res.y[1])


def branching_flow(lam: float, t: float, p: ModelParams) -> float:
    """``v_t(lam)``, the solution of ``v' = -Psi(v)`` started at ``lam``."""
    return _branching_flow(lam, t, p, 1e-11)[0]


def _grey_time(v: float, p: ModelParams) -> float:
    """``int_v^inf dz / Psi(z)``, integrated in ``s = log z``.

    In that variable the integrand is ``z / Psi(z)``, which decays like
    ``exp(-(alpha - 1) s)`` or faster, so a finite window of ``s`` suffices.
    """
    half_var = 0.5 * p.sigma ** 2
    jump = 0.0
    if p.sigma_N > 0:
        jump = p.sigma_N ** p.alpha / -math.cos(math.pi * p.alpha / 2.0) if not is_gaussian(p.alpha) \
            else p.sigma_N ** 2
    rate = 1.0 if half_var > 0 or is_gaussian(p.alpha) else p.alpha - 1.0

    def f(s):
        return 1.0 / (p.a + half_var * math.exp(s) + jump * math.exp((p.alpha - 1.0) * s))

    s0 = math.log(v)
    width = min(60.0 / rate, 600.0)
    edges = [s0, s0 + min(20.0, width), s0 + width]
    return sum(quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0] for lo, hi in zip(edges, edges[1:]))


def grey_condition(p: ModelParams) -> bool:
    """Whether ``int^inf dz / Psi(z)`` is finite."""
    return p.sigma > 0 or p.sigma_N > 0


def vbar(t: float, p: ModelParams) -> float:
    """Minimal solution ``vbar_t`` of ``v' = -Psi(v)`` with ``vbar_{0+} = inf``.

    Found by solving ``t = int_{vbar}^inf dz / Psi(z)`` for ``vbar`` with a
    bracketed root search in ``log vbar``.
    """
    if not (t > 0):
        raise DomainError("t must be positive")
    if not grey_condition(p):
        raise DivergenceError("int^inf dz / Psi(z) diverges: no finite-time extinction")
    g = lambda s: _grey_time(math.exp(s), p) - t  # noqa: E731
    lo, hi = 0.0, 0.0
    while g(lo) < 0:
        lo -= 2.0
    while g(hi) > 0:
        hi += 2.0
    s = brentq(g, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200)
    return math.exp(s)


def moment_domain_s(p: ModelParams) -> Interval:
    """Maximal domain ``[0, 1]`` of ``q -> E[S_T**q]`` (needs ``a > sigma rho``)."""
    if not p.a > p.sigma * p.rho:
        raise DomainError("moment domain result assumes a > sigma * rho")
    return Interval(0.0, 1.0, True, True)


def w_root(xi1: float, p: ModelParams) -> float:
    """Nonpositive root ``w`` of ``R(xi1, w) = 0`` for real ``xi1`` in ``[0, 1]``."""
    xi1 = float(xi1)
    if not 0.0 <= xi1 <= 1.0:
        raise DomainError("w is defined for xi1 in [0, 1]")
    if xi1 in (0.0, 1.0):
        return 0.0
    f = lambda w: _R(xi1, 0.0, w, p).real  # noqa: E731
    lo = -1.0
    while f(lo) < 0:
        lo *= 2.0
        if lo < -1e12:
            raise DomainError("no root of R on the negative axis")
    return brentq(f, lo, 0.0, xtol=1e-15, rtol=1e-14)


def moment_domain_v(p: ModelParams) -> Interval:
    """``{q : E[V_t**q] < inf} = (-2ab/sigma**2, alpha)``."""
    lo = -math.inf if p.sigma == 0 else -2.0 * p.a * p.b / p.sigma ** 2
    hi = math.inf if is_gaussian(p.alpha) else p.alpha
    return Interval(lo, hi, False, False)


def char_fn_log_s(u, T: float, p: ModelParams) -> np.ndarray:
    """``E[exp(i u log S_T)]`` on an array of real ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u.shape, dtype=complex)
    for i, ui in enumerate(u):
        sol = solve_riccati(FreqTriple(1j * ui, 0.0, 0.0), T, p)
        out[i] = sol.transform(p, 1j * ui)
    return out


__all__ = [
    "FreqTriple", "RiccatiSolution", "Interval", "R_op", "F_op", "solve_riccati",
    "heston_closed_form", "laplace_v", "branching_flow", "vbar", "grey_condition",
    "moment_domain_s", "moment_domain_v", "w_root", "char_fn_log_s", "BlowUpError",
]
