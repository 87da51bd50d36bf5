import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from alpha_heston.errors import DomainError, NotSupportedError, ValidationError
from alpha_heston.levy import levy_density
from alpha_heston.measure import EsscherParams, risk_premiums, tempered_density, to_physical
from alpha_heston.params import FIGURE2, FIGURE3, SimGrid
from alpha_heston.streams import stream


def test_identity_map():
    phys = to_physical(FIGURE3, EsscherParams())
    assert phys.params_P == FIGURE3
    assert phys.tempering == 0.0
    assert phys.drift_coeffs == (0.0, 0.0)


def test_tempering_speeds_up_mean_reversion():
    phys = to_physical(FIGURE2, EsscherParams(theta=0.5))
    tilt = 1.26 * 0.5 ** 0.26 / math.cos(math.pi * 0.63)
    assert phys.params_P.a == pytest.approx(5.0 - tilt, rel=1e-14)
    assert phys.params_P.a > 5.0


def test_invariants_at_reference_tilt():
    q = FIGURE2
    phys = to_physical(q, EsscherParams(eta=-0.5, eta_bar=0.2, theta=0.1))
    pp = phys.params_P
    assert pp.a * pp.b == pytest.approx(q.a * q.b, rel=1e-15)
    assert (pp.sigma, pp.sigma_N, pp.alpha, pp.rho) == (q.sigma, q.sigma_N, q.alpha, q.rho)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2), st.floats(-0.9, 0.9))
def test_product_invariant_for_all_valid_tilts(eta, eta_bar, theta, rho):
    q = FIGURE2.with_(rho=rho)
    phys = to_physical(q, EsscherParams(eta, eta_bar, theta))
    assert phys.params_P.a * phys.params_P.b == pytest.approx(q.a * q.b, rel=1e-12)


def test_invalid_tilt_is_rejected():
    with pytest.raises(ValidationError):
        to_physical(FIGURE2, EsscherParams(eta=100.0))
    with pytest.raises(DomainError):
        EsscherParams(theta=-0.1)


def test_price_drift():
    phys = to_physical(FIGURE3.with_(r=0.02), EsscherParams(eta=-0.5, eta_bar=0.2))
    c = -(-0.5 * -0.5 + math.sqrt(0.75) * 0.2)
    assert phys.price_drift(0.1) == pytest.approx(0.02 + c * 0.1, rel=1e-14)


def test_risk_premiums():
    e = EsscherParams(eta=-0.5, eta_bar=0.3, theta=0.0)
    assert risk_premiums(0.0, FIGURE3, e) == (0.0, 0.0)
    ls, lv = risk_premiums(0.1, FIGURE3, e)
    assert lv == pytest.approx(0.08 * 0.5 * 0.1, rel=1e-14) and lv > 0
    ls2, lv2 = risk_premiums(0.2, FIGURE3, e)
    assert (ls2, lv2) == (2 * ls, 2 * lv)
    with pytest.raises(DomainError):
        risk_premiums(-0.1, FIGURE3, e)


def test_volatility_premium_sign_grid():
    q = FIGURE2
    for eta in (-2.0, -0.5, 0.0, 0.5, 2.0):
        for theta in (0.0, 0.01, 0.5, 2.0):
            e = EsscherParams(eta=eta, theta=theta)
            comb = q.sigma * eta + q.alpha * q.sigma_N * theta ** (q.alpha - 1) / math.cos(math.pi * q.alpha / 2)
            _, lv = risk_premiums(1.0, q, e)
            assert np.sign(lv) == -np.sign(comb)


def test_tempered_density():
    z = np.array([0.01, 0.5, 3.0])
    np.testing.assert_array_equal(tempered_density(z, 1.26, 0.0), levy_density(1.26, z))
    np.testing.assert_allclose(tempered_density(z, 1.26, 0.7) / levy_density(1.26, z), np.exp(-0.7 * z), rtol=1e-14)
    # tempering makes the large-jump mean finite; near zero only zeta**2 is integrable
    big, err = quad(lambda s: s * tempered_density(s, 1.26, 0.5), 1, np.inf, limit=200)
    assert math.isfinite(big) and err < 1e-8 * big
    small, err = quad(lambda s: s * s * tempered_density(s, 1.26, 0.5), 0, 1, limit=200)
    assert math.isfinite(small) and err < 1e-8 * small
    with pytest.raises(DomainError):
        tempered_density(0.0, 1.26, 0.5)


def test_physical_params_are_simulable():
    phys = to_physical(FIGURE2, EsscherParams(eta=-0.5))
    path = phys.simulate_v_path(SimGrid(0.5, 500), stream(0))
    assert np.all(path.values >= 0)
    with pytest.raises(NotSupportedError):
        to_physical(FIGURE2, EsscherParams(theta=0.1)).simulate_v_path(SimGrid(0.5, 500), stream(0))
