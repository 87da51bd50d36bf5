"""Jump clusters of the variance process.

Fix a threshold ``y``. Removing every jump of size ``>= y`` from ``V`` while
keeping the full compensator gives the fundamental process ``V^(y)``, an
alpha-CIR-type process with speed ``a~ = a + sigma_N Theta`` and level
``b~ = a b / a~``. Large ("mother") jumps arrive at rate
``nu((y_bar, inf)) V^(y)`` with Pareto(alpha, y) sizes, and each starts an
independent branching process without immigration (a cluster). ``V`` is the
sum of the fundamental process and all clusters started so far.

Independent pieces consume disjoint random streams: the fundamental path,
the mother-jump marks, and one stream per cluster.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import quad
from scipy.special import gamma, gammaincc

from .errors import DivergenceError, DomainError
from .levy import effective_params, levy_tail_mass, psi_alpha
from .params import JumpThreshold, ModelParams, SimGrid, check_alpha, is_gaussian
from .riccati import _grey_time, grey_condition, vbar
from .sde import AlphaCIRScheme, VPath, _path, simulate_cb_batch
from .streams import CLUSTERS, FUNDAMENTAL, MARKS, blocks, child_seed, stream


@dataclass(frozen=True)
class ClusterConfig:
    """Threshold and grid for a cluster experiment.

    ``horizon_cap`` bounds the simulated lifetime of a single cluster; it
    defaults to ``50 / a``.
    """

    threshold: JumpThreshold
    grid: SimGrid
    horizon_cap: float | None = None

    def __post_init__(self):
        if self.threshold.y <= self.grid.small_jump_cutoff:
            raise DomainError("threshold y must exceed the small-jump cutoff")

    @classmethod
    def make(cls, y: float, sigma_N: float, grid: SimGrid, **kw) -> "ClusterConfig":
        return cls(JumpThreshold.from_y(y, sigma_N), grid, **kw)

    def cap_time(self, p: ModelParams) -> float:
        return self.horizon_cap if self.horizon_cap is not None else 50.0 / p.a


@dataclass(frozen=True)
class MotherJump:
    time: float
    size: float

    def __post_init__(self):
        if not self.size > 0:
            raise DomainError("mother jump size must be positive")


@dataclass
class ClusterRecord:
    """One cluster. It enters the composed path at grid time ``start``.

    ``duration`` is the time from ``start`` to absorption, ``inf`` when the
    cluster outlived the horizon cap (``capped`` is then True).
    """

    mother: MotherJump
    start: float
    path: VPath
    duration: float
    capped: bool = False


@dataclass
class Decomposition:
    fundamental: VPath
    clusters: list[ClusterRecord] = field(default_factory=list)
    composed: VPath | None = None

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def _check_jumps(p: ModelParams):
    if is_gaussian(p.alpha) or p.sigma_N == 0:
        raise DomainError("cluster analysis needs alpha < 2 and sigma_N > 0")


def _fund_scheme(p: ModelParams, c: ClusterConfig):
    return AlphaCIRScheme.for_model(p, c.grid, cap=c.threshold.y)


def simulate_fundamental(p: ModelParams, c: ClusterConfig, rng: np.random.Generator) -> VPath:
    """Path of ``V^(y)``: every jump of size ``>= y`` removed, compensator kept."""
    _check_jumps(p)
    return _path(_fund_scheme(p, c), p.V0, c.grid, rng)


def mother_rate(p: ModelParams, c: ClusterConfig) -> float:
    """Mother-jump intensity per unit of ``V^(y)``."""
    return levy_tail_mass(p.alpha, c.threshold.y_bar)


def sample_jump_size(alpha: float, y: float, rng: np.random.Generator, size=None):
    """Pareto(alpha, y) variates ``y U^(-1/alpha)``, all strictly above ``y``."""
    check_alpha(alpha)
    if y <= 0:
        raise DomainError("y must be positive")
    u = 1.0 - rng.random(size)
    out = np.maximum(y * u ** (-1.0 / alpha), np.nextafter(y, np.inf))
    return out.item() if np.ndim(out) == 0 else out


def sample_mother_jumps(fundamental: VPath, c: ClusterConfig, alpha: float, sigma_N: float,
                        rng: np.random.Generator) -> list[MotherJump]:
    """Mother jumps driven by a fundamental path.

    Within each grid step the intensity is frozen at the left-endpoint value,
    so arrivals are Poisson per step with uniform times inside it.
    """
    m = levy_tail_mass(alpha, c.threshold.y / sigma_N)
    v = np.maximum(fundamental.values[:-1], 0.0)
    dt = np.diff(fundamental.times)
    counts = rng.poisson(m * v * dt)
    out = []
    for i in np.flatnonzero(counts):
        t0 = fundamental.times[i]
        times = np.sort(t0 + dt[i] * rng.random(counts[i]))
        sizes = sample_jump_size(alpha, c.threshold.y, rng, counts[i])
        out.extend(MotherJump(float(t), float(s)) for t, s in zip(times, np.atleast_1d(sizes)))
    return out


def simulate_cluster(size: float, p: ModelParams, c: ClusterConfig, rng) -> tuple[VPath, float, bool]:
    """Cluster path from ``size`` until absorption or the horizon cap."""
    g = c.grid
    cap = c.cap_time(p)
    n = max(1, int(math.ceil(cap / g.dt)))
    cg = SimGrid(n * g.dt, n, g.small_jump_cutoff, g.relative_cutoff)
    scheme = AlphaCIRScheme.for_model(p, cg, immigration=0.0)
    path = _path(scheme, size, cg, rng, absorb=True)
    if path.absorbed_at is None:
        return path, math.inf, True
    return path, float(path.absorbed_at), False


def build_decomposition(p: ModelParams, c: ClusterConfig, rng: np.random.Generator) -> Decomposition:
    """Fundamental path, its mother jumps and one cluster per mother jump.

    The composed path is the pointwise sum on the grid. A mother jump in the
    step ``(t_i, t_{i+1}]`` enters at ``t_{i+1}``, as in a direct Euler step.
    """
    _check_jumps(p)
    seed = child_seed(rng)
    g = c.grid
    fund = simulate_fundamental(p, c, stream(seed, FUNDAMENTAL))
    mothers = sample_mother_jumps(fund, c, p.alpha, p.sigma_N, stream(seed, MARKS))
    composed = fund.values.copy()
    ledger = [fund.jumps]
    records = []
    for n, mj in enumerate(mothers):
        path, duration, capped = simulate_cluster(mj.size, p, c, stream(seed, CLUSTERS, n))
        start_idx = min(int(math.floor(mj.time / g.dt)) + 1, g.n_steps)
        start = float(fund.times[start_idx])
        span = min(g.n_steps + 1 - start_idx, path.values.size)
        composed[start_idx:start_idx + span] += path.values[:span]
        ledger.append(np.array([[mj.time, mj.size]]))
        if path.jumps.size:
            inner = path.jumps.copy()
            inner[:, 0] += start
            ledger.append(inner[inner[:, 0] <= g.t_end])
        records.append(ClusterRecord(mj, start, path, duration, capped))
    jumps = np.concatenate(ledger)
    jumps = jumps[np.argsort(jumps[:, 0], kind="stable")]
    composed_path = VPath(fund.times.copy(), composed, jumps, None, fund.clamp_count)
    return Decomposition(fund, records, composed_path)


# ---------------------------------------------------------------------------
# vectorised replicates


def decomposition_batch(p: ModelParams, c: ClusterConfig, n_reps: int, rng: np.random.Generator, *,
                        clusters=True, observe=None, survival_times=None):
    """Many independent decompositions stepped together.

    Returns a dict with per-replicate arrays: ``V`` (composed terminal value,
    only when ``clusters``), ``fund`` (fundamental terminal value), ``count``
    (mother jumps on ``[0, t_end]``), ``tau1`` (first mother-jump time, inf if
    none) and optionally ``obs`` (composed values at ``observe``) and
    ``fund_int`` (left-Riemann ``int_0^t V^(y)`` at ``survival_times``). Also
    ``sizes`` (all mother sizes) and ``capped`` (clusters alive past the cap
    at the end, an int).
    """
    _check_jumps(p)
    seed = child_seed(rng)
    r_fund, r_marks, r_cl = stream(seed, FUNDAMENTAL), stream(seed, MARKS), stream(seed, CLUSTERS)
    g = c.grid
    dt = g.dt
    fscheme = _fund_scheme(p, c)
    cscheme = AlphaCIRScheme.for_model(p, g, immigration=0.0)
    m = mother_rate(p, c)
    y = c.threshold.y

    def steps_of(times):
        out = {}
        for j, t in enumerate(times or []):
            k = int(round(t / dt))
            if not 0 <= k <= g.n_steps or abs(k * dt - t) > 1e-9 * max(1.0, t):
                raise DomainError(f"time {t} is not on the grid")
            out.setdefault(k, []).append(j)
        return out

    obs_at, surv_at = steps_of(observe), steps_of(survival_times)
    v = np.full(n_reps, float(p.V0))
    integral = np.zeros(n_reps)
    count = np.zeros(n_reps, dtype=np.int64)
    tau1 = np.full(n_reps, np.inf)
    cl_val = np.empty(0)
    cl_own = np.empty(0, dtype=np.int64)
    sizes = []
    obs = np.empty((n_reps, len(observe or [])))
    fint = np.empty((n_reps, len(survival_times or [])))
    for j in obs_at.get(0, []):
        obs[:, j] = v
    for j in surv_at.get(0, []):
        fint[:, j] = 0.0
    for i in range(g.n_steps):
        lam = m * v * dt
        new, _, _, _ = fscheme.step(v, r_fund)
        np.maximum(new, 0.0, out=new)
        integral += v * dt
        k = r_marks.poisson(lam)
        tot = int(k.sum())
        if tot:
            owners = np.repeat(np.arange(n_reps), k)
            u = r_marks.random(tot)
            s = sample_jump_size(p.alpha, y, r_marks, tot)
            s = np.atleast_1d(s)
            sizes.append(s)
            first = np.full(n_reps, np.inf)
            np.minimum.at(first, owners, i * dt + dt * u)
            tau1 = np.minimum(tau1, first)
            count += k
        if clusters:
            if cl_val.size:
                cnew, _, _, _ = cscheme.step(cl_val, r_cl)
                alive = cnew > 1e-12
                cl_val, cl_own = cnew[alive], cl_own[alive]
            if tot:
                cl_val = np.concatenate([cl_val, s])
                cl_own = np.concatenate([cl_own, owners])
        v = new
        for j in surv_at.get(i + 1, []):
            fint[:, j] = integral
        if obs_at.get(i + 1):
            comp = v + np.bincount(cl_own, cl_val, minlength=n_reps) if clusters else v
            for j in obs_at[i + 1]:
                obs[:, j] = comp
    out = {"fund": v, "count": count, "tau1": tau1,
           "sizes": np.concatenate(sizes) if sizes else np.empty(0)}
    if clusters:
        out["V"] = v + np.bincount(cl_own, cl_val, minlength=n_reps)
        out["active"] = int(cl_val.size)
    if observe is not None:
        out["obs"] = obs
    if survival_times is not None:
        out["fund_int"] = fint
    return out


def run_decomposition_batches(p: ModelParams, c: ClusterConfig, n_reps: int, seed: int, *,
                              block_size=4096, threads=1, **kw):
    """Block-wise :func:`decomposition_batch` keyed by ``seed``; order is fixed."""
    jobs = list(blocks(n_reps, block_size))

    def one(job):
        i, n = job
        return decomposition_batch(p, c, n, stream(seed, 7, i), **kw)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    out = {}
    for key, val in parts[0].items():
        vals = [q[key] for q in parts]
        out[key] = np.concatenate(vals) if isinstance(val, np.ndarray) else sum(vals)
    return out


# ---------------------------------------------------------------------------
# closed forms


def expected_cluster_count(t: float, p: ModelParams, c: ClusterConfig | JumpThreshold) -> float:
    """Expected number of mother jumps on ``[0, t]``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    _check_jumps(p)
    th = c.threshold if isinstance(c, ClusterConfig) else c
    al = p.alpha
    a_t, b_t = effective_params(p.a, p.b, p.sigma_N, al, th.y_bar)
    pref = (1.0 - al) * p.sigma_N ** al / (math.cos(math.pi * al / 2.0) * gamma(2.0 - al) * th.y ** al)
    return pref * (b_t * t + (p.V0 - b_t) * (-math.expm1(-a_t * t)) / a_t)


def _one_minus_laplace_pareto(x, alpha):
    """``E[1 - exp(-x P)] `` for ``P ~ Pareto(alpha, 1)``, i.e. ``1 - alpha x^alpha Gamma(-alpha, x)``."""
    x = float(x)
    if x == 0.0:
        return 0.0
    if x < 1.0:
        # series: -alpha x^a Gamma(-a) + alpha sum_{n>=1} (-x)^n / (n! (n - a))
        total = -alpha * x ** alpha * gamma(-alpha)
        term, n = 1.0, 1
        while True:
            term *= -x / n
            inc = alpha * term / (n - alpha)
            total += inc
            if abs(inc) < 1e-17 * abs(total) or n > 200:
                break
            n += 1
        return total
    # Gamma(-a, x) by downward recurrence from Gamma(2 - a, x)
    g2 = gammaincc(2.0 - alpha, x) * gamma(2.0 - alpha)
    ex = math.exp(-x)
    g1 = (g2 - x ** (1.0 - alpha) * ex) / (1.0 - alpha)
    g0 = (g1 - x ** (-alpha) * ex) / (-alpha)
    return 1.0 - alpha * x ** alpha * g0


def expected_cluster_duration(p: ModelParams, c: ClusterConfig | JumpThreshold) -> float:
    """``E[theta] = int_0^inf (1 - E[exp(-z P)]) / Psi(z) dz`` with ``P ~ Pareto(alpha, y)``.

    The inner integral over jump sizes is evaluated through the incomplete
    Gamma function, the outer one by adaptive quadrature.
    """
    _check_jumps(p)
    if not grey_condition(p):
        raise DivergenceError("clusters never die out: int^inf dz / Psi diverges")
    th = c.threshold if isinstance(c, ClusterConfig) else c
    y, al = th.y, p.alpha
    bp = p.branching

    def f(z):
        return _one_minus_laplace_pareto(y * z, al) / psi_alpha(z, bp)

    head = sum(quad(f, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=400)[0]
               for lo, hi in [(0.0, 1.0 / y), (1.0 / y, 100.0 / y)])
    # beyond 100 / y the numerator is 1 to within e^-100
    tail = _grey_time(100.0 / y, p)
    return head + tail


def duration_tail_bound(t: float, p: ModelParams, c: ClusterConfig | JumpThreshold, q1: float) -> float:
    """``alpha y / (alpha - 1) q1 e^{-a (t - 1)}`` for ``t > 1``."""
    if t <= 1:
        raise DomainError("the bound holds for t > 1")
    if q1 <= 0:
        raise DomainError("q1 must be positive")
    th = c.threshold if isinstance(c, ClusterConfig) else c
    al = check_alpha(p.alpha)
    return al * th.y / (al - 1.0) * q1 * math.exp(-p.a * (t - 1.0))


def default_q1(p: ModelParams) -> float:
    """``vbar_1``, for which the tail bound provably holds."""
    return vbar(1.0, p)


def cluster_durations(p: ModelParams, c: ClusterConfig, n: int, seed: int, block_size=4096):
    """Absorption times of ``n`` clusters started from Pareto(alpha, y) sizes."""
    _check_jumps(p)
    cap = c.cap_time(p)
    g = c.grid
    cg = SimGrid.with_dt(cap, g.dt, small_jump_cutoff=g.small_jump_cutoff,
                         relative_cutoff=g.relative_cutoff)
    out = []
    for i, m in blocks(n, block_size):
        rng = stream(seed, CLUSTERS, i)
        u0 = np.atleast_1d(sample_jump_size(p.alpha, c.threshold.y, rng, m))
        out.append(simulate_cb_batch(u0, p, cg, rng))
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# Poisson limit


def poisson_limit_rate(p: ModelParams, c_scale: float) -> float:
    """``lambda = b nu((c / sigma_N, inf))``."""
    _check_jumps(p)
    if c_scale <= 0:
        raise DomainError("c must be positive")
    return p.b * levy_tail_mass(p.alpha, c_scale / p.sigma_N)


@dataclass
class PoissonLimitReport:
    n: int
    y_n: float
    lam: float
    t: float
    counts: np.ndarray
    empirical_pmf: dict
    target_pmf: dict
    chi2: float
    dof: int
    p_value: float

    def to_dict(self) -> dict:
        return {
            "n": self.n, "y_n": self.y_n, "lambda": self.lam, "t": self.t,
            "mean": float(self.counts.mean()), "target_mean": self.lam * self.t,
            "empirical_pmf": self.empirical_pmf, "target_pmf": self.target_pmf,
            "chi2": self.chi2, "dof": self.dof, "p_value": self.p_value,
        }


def chi2_poisson(counts: np.ndarray, mean: float, min_expected: float = 5.0):
    """Chi-square test of integer counts against Poisson(mean).

    Cells are ``0, 1, ..., K-1`` and ``>= K``, with ``K`` the largest value
    for which every expected cell count is at least ``min_expected``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.size

    def cell_probs(k):
        return np.append(stats.poisson.pmf(np.arange(k), mean), stats.poisson.sf(k - 1, mean))

    k = max(1, int(counts.max()))
    while k > 1 and n * cell_probs(k).min() < min_expected:
        k -= 1
    expected = n * cell_probs(k)
    observed = np.array([np.sum(counts == j) for j in range(k)] + [np.sum(counts >= k)])
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    dof = k
    return chi2, dof, float(stats.chi2.sf(chi2, dof)), observed, expected


def poisson_limit_experiment(n: int, c_scale: float, t: float, p: ModelParams, n_reps: int,
                             rng: np.random.Generator, *, dt: float = 0.01,
                             block_size: int = 4096) -> PoissonLimitReport:
    """Mother-jump counts on ``[0, n t]`` at threshold ``y_n = c n^(1/alpha)``.

    Compares them with Poisson(lambda t) where ``lambda = b nu((c/sigma_N, inf))``.
    """
    if n < 1:
        raise DomainError("n must be a positive integer")
    if t <= 0:
        raise DomainError("t must be positive")
    lam = poisson_limit_rate(p, c_scale)
    y_n = c_scale * n ** (1.0 / p.alpha)
    grid = SimGrid.with_dt(n * t, dt)
    cfg = ClusterConfig.make(y_n, p.sigma_N, grid)
    out = run_decomposition_batches(p, cfg, n_reps, child_seed(rng), block_size=block_size,
                                    clusters=False)
    counts = out["count"]
    chi2, dof, pv, _, _ = chi2_poisson(counts, lam * t)
    top = int(counts.max())
    emp = {str(j): float(np.mean(counts == j)) for j in range(top + 1)}
    tgt = {str(j): float(stats.poisson.pmf(j, lam * t)) for j in range(top + 1)}
    return PoissonLimitReport(n, y_n, lam, t, counts, emp, tgt, chi2, dof, pv)
