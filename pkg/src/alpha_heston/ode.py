"""Adaptive Dormand-Prince 4(5) integrator for small complex or real systems.

A hand-rolled solver (rather than ``scipy.integrate.solve_ivp``) because the
Riccati flow must reject any step whose stages leave the admissible region,
which ``solve_ivp`` cannot express.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, ConeExitError

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class _Rejected(Exception):
    pass


@dataclass
class OdeResult:
    y: np.ndarray
    n_steps: int
    n_rejected: int
    est_error: float


def dopri45(f, y0, t_end, *, rtol=1e-10, atol=1e-12, h0=None, h_min=None,
            admissible=None, ceiling=np.inf, ceiling_index=0):
    """Integrate ``y' = f(y)`` (autonomous) from 0 to ``t_end``.

    Parameters
    ----------
    f : callable
        Right-hand side, ``f(y) -> array`` of the same shape as ``y``.
    admissible : callable, optional
        ``admissible(y) -> bool``. A step is rejected (and the step size
        halved) whenever a stage or the new state is not admissible. If the
        step size falls below ``h_min`` a :class:`ConeExitError` is raised.
    ceiling : float
        :class:`BlowUpError` is raised when ``|y[ceiling_index]|`` exceeds it.

    Returns
    -------
    OdeResult
        Final state, accepted and rejected step counts and the sum of the
        accepted local error estimates.
    """
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    t = 0.0
    if h_min is None:
        h_min = 1e-14 * max(t_end, 1.0)
    h = h0 if h0 is not None else min(t_end, 1e-3 * max(t_end, 1.0))
    n_acc = n_rej = 0
    err_sum = 0.0
    if admissible is not None and not admissible(y):
        raise ConeExitError("initial state is outside the admissible region", t=0.0)
    k1 = f(y)
    while t < t_end:
        h = min(h, t_end - t)
        try:
            ks = [k1]
            for i in range(1, 7):
                yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
                if admissible is not None and not admissible(yi):
                    raise _Rejected
                ki = f(yi)
                if not np.all(np.isfinite(ki)):
                    raise _Rejected
                ks.append(ki)
            y_new = yi  # FSAL: stage 7 is evaluated at the 5th-order solution
            err_vec = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean(np.abs(err_vec / scale) ** 2)))
        except _Rejected:
            n_rej += 1
            h *= 0.25
            if h < h_min:
                raise ConeExitError("solution left the admissible region", t=t) from None
            continue
        if err <= 1.0:
            t += h
            y = y_new
            k1 = ks[6]
            n_acc += 1
            err_sum += float(np.max(np.abs(err_vec)))
            if abs(y[ceiling_index]) > ceiling:
                raise BlowUpError(f"solution exceeded {ceiling:g} at t = {t:.6g}", t=t)
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            n_rej += 1
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
        if h < h_min and t < t_end:
            raise BlowUpError(f"step size underflow at t = {t:.6g}", t=t)
    return OdeResult(y, n_acc, n_rej, err_sum)
