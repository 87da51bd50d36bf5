"""Path simulation of the alpha-CIR variance and the joint (log S, V, int V) system.

Scheme
------
Euler steps with the jump part split by size. Within a step of length ``dt``
the state ``v`` is frozen and the jumps of the variance are those of a
compound Poisson random measure with intensity ``v * C * sigma_N**alpha *
x**(-1-alpha) dx`` in variance units. With a per-step cutoff
``c = min(eps, kappa * v)``:

* jumps of size ``>= c`` are drawn individually (Poisson count, Pareto sizes)
  and compensated by their mean;
* jumps below ``c`` are replaced by a centred Gaussian of matching variance.

Making ``c`` proportional to ``v`` when the state is small keeps the
Gaussian replacement a fixed, small fraction of the jump activity at every
scale, which matters for extinction times of the cluster processes. The
diffusion and drift use ``max(v, 0)`` and a negative proposal is set to zero
(counted in ``clamp_count``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .levy import levy_constant
from .params import ModelParams, SimGrid, is_gaussian
from .streams import PATHS, run_blocks

ABSORPTION_FLOOR = 1e-12


@dataclass
class VPath:
    """A variance path on a uniform grid with its ledger of large jumps."""

    times: np.ndarray
    values: np.ndarray
    jumps: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    jump_increments: np.ndarray | None = None
    clamp_count: int = 0
    absorbed_at: float | None = None

    def to_csv(self) -> str:
        return _csv(["t", "V"], [self.times, self.values])

    def ledger_csv(self) -> str:
        return _csv(["t", "size"], [self.jumps[:, 0], self.jumps[:, 1]])


@dataclass
class JointPath:
    vpath: VPath
    log_s: np.ndarray
    int_v: np.ndarray

    def to_csv(self) -> str:
        return _csv(["t", "V", "logS", "intV"],
                    [self.vpath.times, self.vpath.values, self.log_s, self.int_v])


def _csv(header, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def read_csv(text: str) -> dict[str, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


class AlphaCIRScheme:
    """One Euler step of ``dX = (imm - a X) dt + sigma sqrt(X) dW + sigma_N X^(1/alpha) dZ``.

    ``cap`` removes every jump of size ``>= cap`` while keeping the full
    compensator, which is exactly the truncated process with speed
    ``a + sigma_N Theta`` and level ``a b / (a + sigma_N Theta)``.
    """

    def __init__(self, a, immigration, sigma, sigma_N, alpha, dt,
                 eps=1e-3, kappa=0.1, cap=None):
        self.a = float(a)
        self.imm = float(immigration)
        self.sigma = float(sigma)
        self.sigma_N = float(sigma_N)
        self.alpha = float(alpha)
        self.dt = float(dt)
        self.eps = float(eps)
        self.kappa = float(kappa)
        self.cap = None if cap is None else float(cap)
        self.gaussian = is_gaussian(self.alpha) or self.sigma_N == 0.0
        if not self.gaussian:
            self.cs = levy_constant(self.alpha) * self.sigma_N ** self.alpha
            if not (math.isfinite(self.cs) and self.cs > 0):
                raise DomainError("jump intensity constant is not finite")
        if self.cap is not None and self.cap <= self.eps:
            raise DomainError("jump cap must exceed the small-jump cutoff")
        if self.a * self.dt >= 1.0:
            raise DomainError("time step too large: need a * dt < 1")

    @classmethod
    def for_model(cls, p: ModelParams, g: SimGrid, *, immigration=None, cap=None):
        imm = p.a * p.b if immigration is None else immigration
        return cls(p.a, imm, p.sigma, p.sigma_N, p.alpha, g.dt,
                   g.small_jump_cutoff, g.relative_cutoff, cap)

    def step(self, v, rng, dw=None):
        """Advance ``v`` by one step.

        Returns ``(v_new, dw, idx, sizes)`` where ``dw`` are the standard normals
        driving the Brownian term and ``(idx, sizes)`` the explicit jumps.
        ``v_new`` is the raw proposal; callers clamp it.
        """
        n = v.shape[0]
        dt = self.dt
        vp = np.maximum(v, 0.0)
        if dw is None:
            dw = rng.standard_normal(n)
        sq = np.sqrt(vp * dt)
        out = vp + (self.imm - self.a * vp) * dt + self.sigma * sq * dw
        z = rng.standard_normal(n)
        if self.gaussian:
            # Z = sqrt(2) W' when alpha = 2
            out += math.sqrt(2.0) * self.sigma_N * sq * z
            return out, dw, _EMPTY_I, _EMPTY_F
        al = self.alpha
        pos = vp > 0.0
        c = np.where(pos, np.minimum(self.eps, self.kappa * vp), 1.0)
        base = vp * self.cs * dt
        lam = base * c ** (-al) / al
        comp = base * c ** (1.0 - al) / (al - 1.0)
        var_small = base * c ** (2.0 - al) / (2.0 - al)
        out += np.sqrt(var_small) * z - comp
        counts = rng.poisson(lam)
        total = int(counts.sum())
        if total == 0:
            return out, dw, _EMPTY_I, _EMPTY_F
        idx = np.repeat(np.arange(n), counts)
        sizes = c[idx] * (1.0 - rng.random(total)) ** (-1.0 / al)
        if self.cap is not None:
            keep = sizes < self.cap
            idx, sizes = idx[keep], sizes[keep]
        out += np.bincount(idx, sizes, minlength=n)
        return out, dw, idx, sizes


_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_F = np.empty(0)


def _check_grid(p: ModelParams, g: SimGrid):
    if p.a * g.dt >= 1.0:
        raise DomainError("time step too large: need a * dt < 1")


def _ledger_rows(t0, dt, sizes, eps, rng):
    big = sizes >= eps
    if not np.any(big):
        return None
    s = sizes[big]
    times = t0 + dt * np.sort(rng.random(s.size))
    # keep strictly inside the step so ledger times never tie across steps
    return np.column_stack([np.clip(times, np.nextafter(t0, np.inf), t0 + dt), s])


def _path(scheme: AlphaCIRScheme, x0: float, g: SimGrid, rng, *, absorb=False,
          joint: ModelParams | None = None):
    n = g.n_steps
    dt = g.dt
    times = g.times()
    values = np.empty(n + 1)
    values[0] = x0
    incr = np.zeros(n)
    ledger = []
    clamps = 0
    absorbed_at = None
    if joint is not None:
        log_s = np.empty(n + 1)
        int_v = np.empty(n + 1)
        log_s[0] = math.log(joint.S0)
        int_v[0] = 0.0
        rho = joint.rho
        rho_bar = math.sqrt(1.0 - rho * rho)
    v = np.array([x0], dtype=float)
    for i in range(n):
        if absorbed_at is not None:
            values[i + 1:] = 0.0
            if joint is not None:  # pragma: no cover - CB paths are never joint
                raise AssertionError
            break
        new, dw, idx, sizes = scheme.step(v, rng)
        if sizes.size:
            rows = _ledger_rows(times[i], dt, sizes, g.small_jump_cutoff, rng)
            if rows is not None:
                ledger.append(rows)
                incr[i] = rows[:, 1].sum()
        if joint is not None:
            vp = max(v[0], 0.0)
            db = rho * dw[0] + rho_bar * rng.standard_normal()
            log_s[i + 1] = log_s[i] + (joint.r - 0.5 * vp) * dt + math.sqrt(vp * dt) * db
        x = new[0]
        if absorb and x <= ABSORPTION_FLOOR:
            x = 0.0
            absorbed_at = times[i + 1]
        elif x < 0.0:
            x = 0.0
            clamps += 1
        values[i + 1] = x
        if joint is not None:
            int_v[i + 1] = int_v[i] + 0.5 * (values[i] + x) * dt
        v[0] = x
    jumps = np.concatenate(ledger) if ledger else np.empty((0, 2))
    vpath = VPath(times, values, jumps, incr, clamps, absorbed_at)
    if joint is not None:
        return JointPath(vpath, log_s, int_v)
    return vpath


def simulate_v_path(p: ModelParams, g: SimGrid, rng: np.random.Generator) -> VPath:
    """One path of the variance process on ``g`` with its jump ledger."""
    _check_grid(p, g)
    return _path(AlphaCIRScheme.for_model(p, g), p.V0, g, rng)


def simulate_joint_path(p: ModelParams, g: SimGrid, rng: np.random.Generator) -> JointPath:
    """One path of ``(V, log S, int_0^t V ds)``; ``int_v`` uses the trapezoid rule."""
    _check_grid(p, g)
    return _path(AlphaCIRScheme.for_model(p, g), p.V0, g, rng, joint=p)


def simulate_cb_path(u0: float, p: ModelParams, g: SimGrid, rng: np.random.Generator) -> VPath:
    """Cluster process: the variance dynamics with ``b = 0`` started at ``u0``.

    The path is absorbed at 0 the first time it falls to ``ABSORPTION_FLOOR``
    or below; ``absorbed_at`` records that grid time (None if still alive).
    """
    if u0 <= 0:
        raise DomainError("u0 must be positive")
    _check_grid(p, g)
    return _path(AlphaCIRScheme.for_model(p, g, immigration=0.0), u0, g, rng, absorb=True)


# ---------------------------------------------------------------------------
# vectorised Monte Carlo


def simulate_batch(p: ModelParams, g: SimGrid, n_paths: int, rng: np.random.Generator, *,
                   joint=False, observe=None, cap=None, immigration=None, x0=None):
    """Simulate ``n_paths`` independent paths and keep terminal (and observed) values.

    Returns a dict with ``V`` (terminal), ``clamps`` (count) and, if requested,
    ``obs`` (shape ``(n_paths, len(observe))``), ``logS`` and ``intV``.
    """
    _check_grid(p, g)
    scheme = AlphaCIRScheme.for_model(p, g, immigration=immigration, cap=cap)
    dt = g.dt
    v = np.full(n_paths, p.V0 if x0 is None else x0, dtype=float)
    obs_steps = {}
    if observe is not None:
        for j, t in enumerate(observe):
            k = int(round(t / dt))
            if not (0 <= k <= g.n_steps) or abs(k * dt - t) > 1e-9 * max(1.0, t):
                raise DomainError(f"observation time {t} is not on the grid")
            obs_steps.setdefault(k, []).append(j)
        obs = np.empty((n_paths, len(observe)))
        for j in obs_steps.get(0, []):
            obs[:, j] = v
    if joint:
        log_s = np.full(n_paths, math.log(p.S0))
        int_v = np.zeros(n_paths)
        rho_bar = math.sqrt(1.0 - p.rho ** 2)
    clamps = 0
    for i in range(g.n_steps):
        new, dw, _, _ = scheme.step(v, rng)
        if joint:
            db = p.rho * dw + rho_bar * rng.standard_normal(n_paths)
            log_s += (p.r - 0.5 * v) * dt + np.sqrt(v * dt) * db
        neg = new < 0.0
        if neg.any():
            clamps += int(neg.sum())
            new[neg] = 0.0
        if joint:
            int_v += 0.5 * (v + new) * dt
        v = new
        for j in obs_steps.get(i + 1, []):
            obs[:, j] = v
    out = {"V": v, "clamps": clamps}
    if observe is not None:
        out["obs"] = obs
    if joint:
        out["logS"] = log_s
        out["intV"] = int_v
    return out


def mc_terminal(p: ModelParams, g: SimGrid, n_paths: int, seed: int, *, threads=1,
                block_size=1 << 15, purpose=PATHS, **kw):
    """Block-parallel wrapper around :func:`simulate_batch` keyed by ``seed``."""
    return run_blocks(lambda n, rng: simulate_batch(p, g, n, rng, **kw),
                      n_paths, seed, purpose, block_size, threads)


def simulate_cb_batch(u0, p: ModelParams, g: SimGrid, rng: np.random.Generator):
    """Absorption times of independent cluster processes started at ``u0``.

    Paths still alive at ``g.t_end`` get ``inf``.
    """
    _check_grid(p, g)
    scheme = AlphaCIRScheme.for_model(p, g, immigration=0.0)
    u = np.array(u0, dtype=float, copy=True)
    theta = np.full(u.shape, np.inf)
    alive = np.arange(u.size)
    for i in range(g.n_steps):
        if alive.size == 0:
            break
        new, _, _, _ = scheme.step(u, rng)
        dead = new <= ABSORPTION_FLOOR
        if dead.any():
            theta[alive[dead]] = (i + 1) * g.dt
            keep = ~dead
            alive = alive[keep]
            u = new[keep]
        else:
            u = new
    return theta


def affine_mean(t, x0: float, a: float, b: float):
    """``E[V_t] = x0 e^{-a t} + b (1 - e^{-a t})``."""
    e = np.exp(-a * np.asarray(t, dtype=float))
    return x0 * e + b * (1.0 - e)
