"""Monte Carlo option prices, Black implied volatilities and smile wings.

Asset options are discounted at ``r``. Variance options pay on ``V_T``
directly with no discounting, and their implied volatility is the Black
volatility on the forward ``E[V_T]`` estimated from the same paths.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DomainError
from .params import ModelParams, SimGrid
from .sde import mc_terminal
from .streams import child_seed


class Underlying(enum.Enum):
    ASSET = "asset"
    VARIANCE = "variance"


class Kind(enum.Enum):
    CALL = "call"
    PUT = "put"


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class OptionSpec:
    underlying: Underlying
    kind: Kind
    strike_log: float
    maturity: float

    def __post_init__(self):
        if not self.maturity > 0:
            raise DomainError("maturity must be positive")


@dataclass(frozen=True)
class PriceEstimate:
    value: float
    std_err: float
    n_paths: int


@dataclass(frozen=True)
class SmilePoint:
    k: float
    implied_vol: float
    std_err_band: float
    price: float
    price_se: float


@dataclass
class SmileCurve:
    """Implied volatilities on a log-strike grid, sorted by ``k``.

    ``excluded`` holds strikes whose out-of-the-money price was within two
    standard errors of zero and therefore not inverted.
    """

    maturity: float
    underlying: Underlying
    forward: float
    points: list[SmilePoint]
    excluded: list[float] = field(default_factory=list)

    @property
    def k(self):
        return np.array([pt.k for pt in self.points])

    @property
    def vols(self):
        return np.array([pt.implied_vol for pt in self.points])

    def to_csv(self) -> str:
        lines = ["k,price,se,implied_vol,iv_band"]
        for pt in self.points:
            vals = (pt.k, pt.price, pt.price_se, pt.implied_vol, pt.std_err_band)
            lines.append(",".join(repr(float(x)) for x in vals))
        return "\r\n".join(lines) + "\r\n"


def black_price(forward, strike, maturity, vol, kind=Kind.CALL):
    """Undiscounted Black price."""
    f, k = float(forward), float(strike)
    if vol <= 0 or maturity <= 0:
        intrinsic = max(f - k, 0.0) if kind is Kind.CALL else max(k - f, 0.0)
        return intrinsic
    s = vol * math.sqrt(maturity)
    d1 = (math.log(f / k) + 0.5 * s * s) / s
    d2 = d1 - s
    if kind is Kind.CALL:
        return f * ndtr(d1) - k * ndtr(d2)
    return k * ndtr(-d2) - f * ndtr(-d1)


def _vega(forward, strike, maturity, vol):
    s = vol * math.sqrt(maturity)
    d1 = (math.log(forward / strike) + 0.5 * s * s) / s
    return forward * math.sqrt(maturity) * math.exp(-0.5 * d1 * d1) / math.sqrt(2.0 * math.pi)


def implied_vol(price: float, forward: float, strike: float, maturity: float,
                kind: Kind = Kind.CALL) -> float:
    """Black volatility reproducing an undiscounted ``price``.

    Bisection to an absolute tolerance of 1e-10 in volatility, followed by a
    single Newton step kept only if it stays inside the final bracket.

    Raises
    ------
    DomainError
        If the price is below intrinsic value or not below the upper bound
        (the forward for calls, the strike for puts).
    """
    if forward <= 0 or strike <= 0 or maturity <= 0:
        raise DomainError("forward, strike and maturity must be positive")
    kind = Kind(kind)
    intrinsic = max(forward - strike, 0.0) if kind is Kind.CALL else max(strike - forward, 0.0)
    upper = forward if kind is Kind.CALL else strike
    tol = 1e-14 * upper
    if price < intrinsic - tol:
        raise DomainError(f"price {price} is below the intrinsic value {intrinsic}")
    if price >= upper:
        raise DomainError(f"price {price} is not below the upper bound {upper}")
    if price <= intrinsic + tol:
        return 0.0
    lo, hi = 0.0, 1.0
    while black_price(forward, strike, maturity, hi, kind) < price:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise DomainError("price too close to the upper bound to invert")
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if black_price(forward, strike, maturity, mid, kind) < price:
            lo = mid
        else:
            hi = mid
    vol = 0.5 * (lo + hi)
    vega = _vega(forward, strike, maturity, vol)
    if vega > 0:
        polished = vol - (black_price(forward, strike, maturity, vol, kind) - price) / vega
        if lo <= polished <= hi:
            vol = polished
    return vol


def terminal_sample(p: ModelParams, T: float, n_paths: int, seed: int, *, g: SimGrid | None = None,
                    threads: int = 1) -> dict:
    """Terminal ``log S_T`` and ``V_T`` shared by all strikes at maturity ``T``."""
    if g is None:
        g = SimGrid.with_dt(T, 1.0 / 500.0)
    if abs(g.t_end - T) > 1e-12 * T:
        raise DomainError("grid end must equal the maturity")
    return mc_terminal(p, g, n_paths, seed, threads=threads, joint=True)


def _payoffs(spec: OptionSpec, sample: dict, p: ModelParams) -> np.ndarray:
    strike = math.exp(spec.strike_log)
    if spec.underlying is Underlying.ASSET:
        x = np.exp(sample["logS"])
        disc = math.exp(-p.r * spec.maturity)
    else:
        x = sample["V"]
        disc = 1.0
    pay = np.maximum(x - strike, 0.0) if spec.kind is Kind.CALL else np.maximum(strike - x, 0.0)
    pay = disc * pay
    if not np.all(np.isfinite(pay)):
        raise FloatingPointError("non-finite payoff encountered")
    return pay


def price_from_sample(spec: OptionSpec, sample: dict, p: ModelParams) -> PriceEstimate:
    pay = _payoffs(spec, sample, p)
    n = pay.size
    return PriceEstimate(float(pay.mean()), float(pay.std(ddof=1) / math.sqrt(n)), n)


def mc_price(spec: OptionSpec, p: ModelParams, n_paths: int, g: SimGrid, rng: np.random.Generator,
             threads: int = 1) -> PriceEstimate:
    """Monte Carlo price of one option; ``rng`` only supplies the master seed."""
    if n_paths < 1000:
        raise DomainError("use at least 1000 paths")
    sample = terminal_sample(p, spec.maturity, n_paths, child_seed(rng), g=g, threads=threads)
    return price_from_sample(spec, sample, p)


def smile_from_sample(sample: dict, p: ModelParams, T: float, k_grid, underlying: Underlying) -> SmileCurve:
    """Invert out-of-the-money prices on a common set of paths."""
    underlying = Underlying(underlying)
    if len(k_grid) == 0:
        raise DomainError("empty strike grid")
    if underlying is Underlying.ASSET:
        forward = p.S0 * math.exp(p.r * T)
        disc = math.exp(-p.r * T)
    else:
        forward = float(np.mean(sample["V"]))
        disc = 1.0
    points, excluded = [], []
    for k in sorted(float(x) for x in k_grid):
        kind = Kind.CALL if k >= math.log(forward) else Kind.PUT
        est = price_from_sample(OptionSpec(underlying, kind, k, T), sample, p)
        if est.value <= 2.0 * est.std_err:
            excluded.append(k)
            continue
        strike = math.exp(k)
        fwd_price = est.value / disc
        fwd_se = est.std_err / disc
        try:
            iv = implied_vol(fwd_price, forward, strike, T, kind)
            hi = implied_vol(fwd_price + fwd_se, forward, strike, T, kind)
            lo = implied_vol(max(fwd_price - fwd_se, 0.0), forward, strike, T, kind)
        except DomainError:
            excluded.append(k)
            continue
        points.append(SmilePoint(k, iv, 0.5 * (hi - lo), est.value, est.std_err))
    return SmileCurve(T, underlying, forward, points, excluded)


def smile(p: ModelParams, T: float, k_grid, underlying: Underlying, n_paths: int,
          rng: np.random.Generator, *, g: SimGrid | None = None, threads: int = 1) -> SmileCurve:
    """Monte Carlo smile with common random numbers across strikes."""
    sample = terminal_sample(p, T, n_paths, child_seed(rng), g=g, threads=threads)
    return smile_from_sample(sample, p, T, k_grid, underlying)


def default_k_grid(center: float, sd: float, n: int = 25):
    """``n`` strikes spanning four standard deviations either side of ``center``."""
    return list(np.linspace(center - 4.0 * sd, center + 4.0 * sd, n))


def wing_regression(curve: SmileCurve, side: Side, n_tail_points: int, *, return_se=False):
    """Least-squares wing slope over the outermost ``n_tail_points`` of a side.

    Asset smiles regress ``Sigma**2`` on ``|x|``; variance smiles regress
    ``Sigma`` on ``sqrt(|x|)``. Here ``x`` is the log-moneyness ``k - log F``,
    which equals ``k`` for an asset with unit forward and differs from it by a
    constant otherwise.
    """
    side = Side(side)
    if n_tail_points < 4:
        raise DomainError("need at least 4 tail points")
    x = curve.k - math.log(curve.forward)
    vols = curve.vols
    mask = x < 0 if side is Side.LEFT else x > 0
    x, vols = x[mask], vols[mask]
    if x.size < n_tail_points:
        raise DomainError(f"only {x.size} valid points on the {side.value} side")
    order = np.argsort(np.abs(x))[-n_tail_points:]
    ax = np.abs(x[order])
    if curve.underlying is Underlying.ASSET:
        xs, ys = ax, vols[order] ** 2
    else:
        xs, ys = np.sqrt(ax), vols[order]
    design = np.column_stack([xs, np.ones_like(xs)])
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    if not return_se:
        return float(coef[0])
    resid = ys - design @ coef
    dof = max(xs.size - 2, 1)
    cov = np.linalg.inv(design.T @ design) * (resid @ resid) / dof
    return float(coef[0]), float(math.sqrt(cov[0, 0]))
