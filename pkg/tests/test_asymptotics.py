import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from alpha_heston.asymptotics import (
    _correction_integral, asset_left_wing, asset_wing_slope, iota_alpha, lee_psi,
    log_small_ball_v_sigma_zero, p_alpha, put_tail_constant, q_alpha, small_ball_v_sigma_pos,
    tail_constant_log_s, tail_constant_v, tail_log_s, tail_v, variance_left_wing, variance_right_wing,
)
from alpha_heston.errors import DomainError
from alpha_heston.levy import levy_tail_mass
from alpha_heston.params import FIGURE2, FIGURE3
from alpha_heston.pricing import Kind, implied_vol
from alpha_heston.riccati import vbar

# mpmath, 40 digits
IOTA_1 = 0.086941910366685243169


def test_p_and_q_limits():
    assert p_alpha(0.0, 5.0, 1.26) == 0.0
    assert q_alpha(0.0, 5.0, 0.14, 1.26) == 0.0
    assert p_alpha(50.0, 5.0, 1.26) < 1e-100
    assert q_alpha(50.0, 5.0, 0.14, 1.26) == pytest.approx(0.14 / (1.26 * 5.0), rel=1e-14)
    assert q_alpha(3.0, 5.0, 0.0, 1.5) == 0.0


def test_p_alpha_closed_form_and_nonnegativity():
    t = 0.7
    exact = (math.exp(-5 * t) - math.exp(-1.26 * 5 * t)) / (5 * 0.26)
    assert p_alpha(t, 5.0, 1.26) == pytest.approx(exact, rel=1e-13)
    ts = np.linspace(0, 10, 200)
    for al in (1.05, 1.5, 1.95):
        assert all(p_alpha(t, 2.0, al) >= 0 and q_alpha(t, 2.0, 0.3, al) >= 0 for t in ts)


def test_continuity_towards_gaussian_alpha():
    for f in (lambda al: p_alpha(1.0, 5.0, al), lambda al: q_alpha(1.0, 5.0, 0.14, al),
              lambda al: iota_alpha(1.0, 0.03, FIGURE2.with_(alpha=al))):
        assert f(2.0 - 1e-4) == pytest.approx(f(2.0), rel=1e-3)


def test_tail_v_scaling_and_prefactor():
    assert tail_v(4.0, 1.0, 0.03, FIGURE2) / tail_v(2.0, 1.0, 0.03, FIGURE2) == pytest.approx(2 ** -1.26, rel=1e-14)
    for al in np.linspace(1.01, 1.99, 30):
        assert -1 / (gamma(-al) * math.cos(math.pi * al / 2)) > 0
    with pytest.raises(DomainError):
        tail_v(1.0, 1.0, 0.03, FIGURE2.with_(alpha=2.0))
    with pytest.raises(DomainError):
        tail_v(0.0, 1.0, 0.03, FIGURE2)


def test_tail_v_factorization():
    # the constant is the Levy tail mass above u = 1 times (q + p x)
    p = FIGURE2
    k = tail_constant_v(1.0, 0.03, p)
    factored = p.sigma_N ** p.alpha * levy_tail_mass(p.alpha, 1.0) \
        * (q_alpha(1.0, p.a, p.b, p.alpha) + p_alpha(1.0, p.a, p.alpha) * 0.03)
    assert k == pytest.approx(factored, rel=1e-12)
    assert k == pytest.approx(0.0115016, rel=1e-5)


def test_iota_reference_and_limits():
    assert iota_alpha(1.0, 0.03, FIGURE2) == pytest.approx(IOTA_1, abs=1e-12)
    assert iota_alpha(1e-8, 0.03, FIGURE2) < 1e-15
    assert iota_alpha(1.0, 0.0, FIGURE2.with_(b=0.0)) == 0.0


def test_iota_matches_direct_integral():
    p = FIGURE2
    a, b, al, x, t = p.a, p.b, p.alpha, 0.03, 1.0
    direct, _ = quad(lambda s: (b * (1 - math.exp(-a * s)) + x * math.exp(-a * s))
                     * (math.exp(a * t) - math.exp(a * s)) ** al, 0, t, epsabs=1e-12)
    assert iota_alpha(t, x, p) == pytest.approx(math.exp(-al * a * t) * direct, rel=1e-10)


def test_tail_log_s():
    assert tail_constant_log_s(1.0, 0.03, FIGURE2) == pytest.approx(0.0025246, rel=1e-4)
    assert tail_log_s(3.0, 1.0, 0.03, FIGURE2) / tail_log_s(1.5, 1.0, 0.03, FIGURE2) \
        == pytest.approx(2 ** -1.26, rel=1e-14)
    assert put_tail_constant(1.0, 0.03, FIGURE2) == tail_constant_log_s(1.0, 0.03, FIGURE2)
    with pytest.raises(DomainError):
        tail_log_s(1.0, 1.0, 0.03, FIGURE2.with_(alpha=2.0))


def test_small_ball_sigma_zero_reference():
    p = FIGURE2.with_(sigma=0.0, alpha=1.5)
    # (-ab cos(3 pi / 4))^2 / u with unit sigma_N
    assert log_small_ball_v_sigma_zero(0.01, p) == pytest.approx(-24.5, rel=1e-13)
    assert log_small_ball_v_sigma_zero(0.001, p) / log_small_ball_v_sigma_zero(0.01, p) == pytest.approx(10.0)
    with pytest.raises(DomainError):
        log_small_ball_v_sigma_zero(0.01, FIGURE2)


def test_small_ball_sigma_zero_exponent():
    p = FIGURE2.with_(sigma=0.0)
    ratio = log_small_ball_v_sigma_zero(1e-4, p) / log_small_ball_v_sigma_zero(1e-2, p)
    assert math.log(ratio) / math.log(100) == pytest.approx((2 - 1.26) / 0.26, rel=1e-12)


def test_small_ball_sigma_pos_exponent():
    p = FIGURE2.with_(sigma=0.5)
    beta = 2 * p.a * p.b / p.sigma ** 2
    u = np.array([1e-3, 1e-6])
    vals = small_ball_v_sigma_pos(u, 1.0, 0.03, p)
    assert math.log(vals[1] / vals[0]) / math.log(1e-3) == pytest.approx(beta, rel=1e-12)
    with pytest.raises(DomainError):
        small_ball_v_sigma_pos(0.01, 1.0, 0.03, FIGURE2.with_(sigma=0.0))


def test_small_ball_cir_branch():
    # with sigma_N = 0, Psi is quadratic and the correction integral has a closed form
    p = FIGURE2.with_(sigma_N=0.0, sigma=0.5)
    v0 = vbar(1.0, p)
    s2 = p.sigma ** 2
    exact = -(2.0 / s2) * math.log1p(2 * p.a / (s2 * v0))
    assert _correction_integral(v0, p) == pytest.approx(exact, rel=1e-8)


def test_lee_psi():
    assert lee_psi(0.0) == 2.0
    assert lee_psi(1e12) == pytest.approx(0.0, abs=1e-11)
    q = np.linspace(0, 50, 100)
    vals = lee_psi(q)
    assert np.all(np.diff(vals) < 0) and np.all((vals > 0) & (vals <= 2))
    assert lee_psi(1.26) == pytest.approx(0.29007, abs=1e-5)
    assert 0 < lee_psi(218.75) < lee_psi(1.26) < 2
    with pytest.raises(DomainError):
        lee_psi(-0.1)


def test_asset_wing_slope():
    assert asset_wing_slope(1.0) == 2.0 and asset_wing_slope(2.0) == 1.0


def test_asset_left_wing_limits():
    k = -1e8
    assert asset_left_wing(k, 1.0, 1.26) ** 2 / -k == pytest.approx(2.0, rel=1e-2)
    assert asset_left_wing(-20.0, 1.0, 1.8) < asset_left_wing(-20.0, 1.0, 1.26)
    with pytest.raises(DomainError):
        asset_left_wing(-2.0, 1.0, 1.26)


def test_asset_left_wing_against_put_asymptotic():
    p = FIGURE3
    const = put_tail_constant(1.0, p.V0, p)
    ratios = []
    for k in (-10.0, -50.0, -200.0):
        put = const * math.exp(k) * abs(k) ** -p.alpha
        ratios.append(implied_vol(put, 1.0, math.exp(k), 1.0, Kind.PUT) / asset_left_wing(k, 1.0, p.alpha))
    # the neglected term is O(log(-k)^(-1/2)) so agreement improves only slowly
    assert abs(ratios[0] - 1) < 0.25
    assert np.all(np.diff(np.abs(np.array(ratios) - 1)) < 0)


def test_variance_right_wing():
    assert variance_right_wing(4.0, 1.0, 1.26) == pytest.approx(2 * math.sqrt(lee_psi(1.26)), rel=1e-14)
    assert variance_right_wing(1.0, 1.0, 1.2) > variance_right_wing(1.0, 1.0, 1.5)
    assert variance_right_wing(1.0, 2.0, 1.26) == pytest.approx(variance_right_wing(1.0, 1.0, 1.26) / math.sqrt(2))
    with pytest.raises(DomainError):
        variance_right_wing(-1.0, 1.0, 1.26)


def test_variance_left_wing_branches():
    p = FIGURE2
    assert variance_left_wing(-1.0, 1.0, p) == pytest.approx(math.sqrt(lee_psi(218.75)), rel=1e-14)
    small = [variance_left_wing(-1.0, 1.0, p.with_(sigma=s)) for s in (0.5, 0.1, 0.01)]
    assert np.all(np.diff(small) < 0) and small[-1] < 0.01
    q = p.with_(sigma=0.0)
    with pytest.raises(DomainError):
        variance_left_wing(-4.0, 1.0, q)
    val = variance_left_wing(-4.0, 1.0, q, put_price=1e-4)
    assert val == pytest.approx(4 * math.sqrt(math.log(math.exp(-4) / 1e-4)) / math.sqrt(2), rel=1e-14)
    with pytest.raises(DomainError):
        variance_left_wing(-4.0, 1.0, q, put_price=1.0)
