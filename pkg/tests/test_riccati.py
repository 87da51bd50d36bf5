import math

import numpy as np
import pytest

from alpha_heston.errors import BlowUpError, DivergenceError, DomainError
from alpha_heston.params import FIGURE2, FIGURE3, SimGrid
from alpha_heston.riccati import (
    F_op, FreqTriple, R_op, _grey_time, branching_flow, char_fn_log_s, grey_condition,
    heston_closed_form, laplace_v, moment_domain_s, moment_domain_v, solve_riccati, vbar, w_root,
)
from alpha_heston.sde import mc_terminal
from alpha_heston.streams import mean_se

# mpmath, 40 digits: root of t = int_v^inf dz / Psi(z) at t = 1, default parameters
VBAR_1 = 0.1226224757010015

HESTON_POINTS = [
    FreqTriple(1j * u, x2, x3)
    for u, x2, x3 in [
        (0.0, -1.0, 0.0), (1.0, 0.0, 0.0), (2.5, 0.0, 0.0), (-4.0, -0.5, 0.0), (10.0, 0.0, 0.0),
        (0.5, -2.0 + 1j, 0.0), (3.0, 0.0, -1.0), (0.0, 0.0, -0.3 + 0.2j), (7.0, -0.1, -0.1), (25.0, 0.0, 0.0),
    ]
]


def test_freq_triple_validation():
    FreqTriple(0.5, -1.0, 0.0)
    FreqTriple(2j, 0.0, 0.0)
    with pytest.raises(DomainError):
        FreqTriple(0.5 + 1j)
    with pytest.raises(DomainError):
        FreqTriple(0.0, 0.1)
    with pytest.raises(DomainError):
        FreqTriple(0.0, 0.0, 0.2)


def test_zero_frequency_is_trivial():
    sol = solve_riccati(FreqTriple(), 2.0, FIGURE2)
    assert sol.psi_T == 0 and sol.phi_T == 0
    assert sol.transform(FIGURE2) == 1.0


def test_R_and_F_examples():
    assert R_op(FreqTriple(0.0), 0.0, FIGURE2) == 0
    assert R_op(FreqTriple(1.0), 0.0, FIGURE2) == 0
    with pytest.raises(DomainError):
        R_op(FreqTriple(), 0.1, FIGURE2)
    assert F_op(FreqTriple(), 0.0, FIGURE2) == 0
    assert F_op(FreqTriple(), -2.0, FIGURE2) == pytest.approx(-2.0 * 0.7)
    p = FIGURE2.with_(r=0.05)
    assert F_op(FreqTriple(1j), -3.0, p) == pytest.approx(0.05j + 3 * F_op(FreqTriple(), -1.0, FIGURE2))


def test_R_exceeds_heston_field():
    heston = FIGURE2.with_(sigma_N=0.0)
    for xi1 in (0.1, 0.5, 0.9):
        for psi in (-0.01, -1.0, -30.0):
            xi = FreqTriple(xi1)
            assert (R_op(xi, psi, FIGURE2) - R_op(xi, psi, heston)).real > 0


@pytest.mark.parametrize("xi", HESTON_POINTS)
def test_gaussian_alpha_matches_heston_closed_form(xi):
    p = FIGURE3.with_(alpha=2.0, r=0.02)
    sol = solve_riccati(xi, 1.5, p)
    psi, phi = heston_closed_form(xi, 1.5, p)
    assert abs(sol.psi_T - psi) <= 1e-6 * max(abs(psi), 1e-3)
    assert abs(sol.phi_T - phi) <= 1e-6 * max(abs(phi), 1e-3)


def test_gaussian_alpha_equals_inflated_heston():
    p = FIGURE3.with_(alpha=2.0, sigma_N=0.5)
    q = p.with_(sigma=math.sqrt(p.sigma ** 2 + 2 * 0.25), sigma_N=0.0, rho=p.rho * p.sigma / math.sqrt(p.sigma ** 2 + 0.5))
    xi = FreqTriple(0.0, -1.0 + 2j, -0.2)
    a, b = solve_riccati(xi, 2.0, p), solve_riccati(xi, 2.0, q)
    assert abs(a.psi_T - b.psi_T) < 1e-10 * abs(b.psi_T)
    assert abs(a.phi_T - b.phi_T) < 1e-10 * abs(b.phi_T)


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0, 1e3])
def test_laplace_consistency(lam):
    sol = solve_riccati(FreqTriple(0.0, -lam, 0.0), 1.0, FIGURE2, tol=1e-11)
    assert sol.transform(FIGURE2).real == pytest.approx(laplace_v(lam, 1.0, FIGURE2.V0, FIGURE2), rel=1e-8)


def test_laplace_monotone_and_normalized():
    assert laplace_v(0.0, 1.0, 0.03, FIGURE2) == 1.0
    lams = [0.1, 1.0, 5.0, 20.0]
    xs = [0.0, 0.03, 0.3]
    grid = np.array([[laplace_v(l, 1.0, x, FIGURE2) for l in lams] for x in xs])
    assert np.all(np.diff(grid, axis=1) < 0)
    assert np.all(np.diff(grid, axis=0) < 0)
    assert np.all((grid > 0) & (grid <= 1))


def test_semigroup_property():
    xi = FreqTriple(2j, -0.5 + 1j, -0.1)
    full = solve_riccati(xi, 2.0, FIGURE3, tol=1e-12)
    half = solve_riccati(xi, 1.0, FIGURE3, tol=1e-12)
    rest = solve_riccati(FreqTriple(xi.xi1, half.psi_T, xi.xi3), 1.0, FIGURE3, tol=1e-12)
    assert abs(rest.psi_T - full.psi_T) < 1e-8 * abs(full.psi_T)
    assert abs(half.phi_T + rest.phi_T - full.phi_T) < 1e-8 * abs(full.phi_T)
    v2 = branching_flow(3.0, 2.0, FIGURE2)
    assert branching_flow(branching_flow(3.0, 1.0, FIGURE2), 1.0, FIGURE2) == pytest.approx(v2, rel=1e-8)


@pytest.mark.parametrize("u", [0.5, 3.0, 20.0])
def test_cone_invariance(u):
    for T in (0.01, 0.3, 3.0):
        sol = solve_riccati(FreqTriple(1j * u, -0.2 + 5j, 0.0), T, FIGURE3)
        assert sol.psi_T.real <= 0


def test_transform_matches_mc_characteristic_function():
    p = FIGURE3
    out = mc_terminal(p, SimGrid(1.0, 250), 20000, 31, joint=True)
    x = out["logS"]
    u = np.array([0.5, 1.0, 2.0, 4.0, 8.0])
    cf = char_fn_log_s(u, 1.0, p)
    for ui, c in zip(u, cf):
        w = np.exp(1j * ui * x)
        m_re, se_re = mean_se(w.real)
        m_im, se_im = mean_se(w.imag)
        assert abs(m_re - c.real) < 3 * se_re + 1e-3
        assert abs(m_im - c.imag) < 3 * se_im + 1e-3


def test_vbar_reference_and_monotone():
    assert vbar(1.0, FIGURE2) == pytest.approx(VBAR_1, rel=1e-10)
    vals = [vbar(t, FIGURE2) for t in (0.1, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(vals) < 0)


def test_vbar_is_limit_of_branching_flow():
    # v_t(lam) = vbar(t + G(lam)) with G(lam) = int_lam^inf dz / Psi(z); G(1e6) is about 3e-4,
    # so v_1(1e6) itself is 0.2% below vbar_1 and only converges as lam grows further
    for lam in (1e4, 1e6):
        shift = _grey_time(lam, FIGURE2)
        assert branching_flow(lam, 1.0, FIGURE2) == pytest.approx(vbar(1.0 + shift, FIGURE2), rel=1e-7)
    assert branching_flow(1e8, 1.0, FIGURE2) == pytest.approx(VBAR_1, rel=1e-4)


def test_vbar_cir_closed_form():
    p = FIGURE2.with_(sigma_N=0.0)
    for t in (0.2, 1.0, 3.0):
        exact = 2 * p.a / (p.sigma ** 2 * math.expm1(p.a * t))
        assert vbar(t, p) == pytest.approx(exact, rel=1e-8)


def test_vbar_divergence_without_noise():
    p = FIGURE2.with_(sigma=0.0, sigma_N=0.0)
    assert not grey_condition(p)
    with pytest.raises(DivergenceError):
        vbar(1.0, p)


def test_w_root():
    assert w_root(0.0, FIGURE3) == 0.0 and w_root(1.0, FIGURE3) == 0.0
    w = w_root(0.5, FIGURE3)
    assert w < 0
    xi = FreqTriple(0.5)
    assert R_op(xi, 0.999 * w, FIGURE3).real * R_op(xi, 1.001 * w, FIGURE3).real < 0
    with pytest.raises(DomainError):
        w_root(1.2, FIGURE3)


@pytest.mark.parametrize("xi1", [0.0, 0.5, 1.0])
def test_moments_inside_unit_interval_are_finite(xi1):
    sol = solve_riccati(FreqTriple(xi1), 5.0, FIGURE3)
    assert math.isfinite(abs(sol.transform(FIGURE3, xi1)))


@pytest.mark.parametrize("xi1", [-0.2, 1.2])
def test_moments_outside_unit_interval_explode_immediately(xi1):
    with pytest.raises(BlowUpError) as exc:
        solve_riccati(FreqTriple(xi1), 1e-3, FIGURE3)
    assert exc.value.t is None or exc.value.t < 1e-3


def test_moment_domains():
    assert moment_domain_s(FIGURE3) == (0.0, 1.0, True, True)
    with pytest.raises(DomainError):
        moment_domain_s(FIGURE3.with_(a=0.05, sigma=0.5, rho=0.5))
    dom = moment_domain_v(FIGURE2)
    assert dom.lo == pytest.approx(-218.75) and dom.hi == 1.26
    assert 1.1 in dom and 1.26 not in dom and -218.75 not in dom
    assert moment_domain_v(FIGURE2.with_(sigma=0.0)).lo == -math.inf
