import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from roughlocalvol import black_scholes as bs
from roughlocalvol.errors import ConvergenceError, PriceDomainError


def test_atm_call_value():
    # 2 N(0.1) - 1, frozen from a high-precision normal CDF
    assert bs.bs_call(0.0, 0.2) == pytest.approx(0.079655674554057963, abs=1e-15)


def test_zero_vol_is_intrinsic():
    assert bs.bs_call(0.0, 0.0) == 0.0
    assert bs.bs_call(-0.2, 0.0) == pytest.approx(1.0 - np.exp(-0.2))
    assert bs.bs_put(0.3, 0.0) == pytest.approx(np.exp(0.3) - 1.0)


def test_large_vol_limit():
    assert bs.bs_call(0.1, 50.0) == pytest.approx(1.0, abs=1e-12)


def test_put_call_parity():
    for k in (-0.3, 0.0, 0.25):
        for v in (0.05, 0.3, 1.0):
            lhs = bs.bs_call(k, v) - bs.bs_put(k, v)
            assert lhs == pytest.approx(1.0 - np.exp(k), abs=1e-14)


@pytest.mark.parametrize("k", np.linspace(-0.5, 0.5, 5))
def test_call_increasing_in_vol(k):
    grid = np.linspace(0.01, 2.0, 40)
    prices = bs.bs_call(k, grid)
    assert np.all(np.diff(prices) >= 0.0)
    # strict wherever the time value is resolvable in doubles
    time_value = prices - max(1.0 - np.exp(k), 0.0)
    resolvable = time_value[:-1] > 1e-12
    assert np.all(np.diff(prices)[resolvable] > 0.0)


def _otm_roundtrip(k, v):
    # inversion is exercised on the out-of-the-money side, where there is no
    # intrinsic value to cancel against
    option = "put" if k < 0.0 else "call"
    price = bs.bs_put(k, v) if k < 0.0 else bs.bs_call(k, v)
    if not 0.0 < price:
        return None
    return abs(bs.implied_vol(price, k, 1.0, option) - v)


@given(st.floats(-0.5, 0.5), st.floats(0.01, 1.0))
@settings(max_examples=100, deadline=None)
def test_implied_vol_roundtrip(k, v):
    err = _otm_roundtrip(k, v)
    assume(err is not None)  # price representable in doubles
    assert err <= 1e-10


def test_implied_vol_roundtrip_fine_grid():
    for k in np.linspace(-0.5, 0.5, 11):
        for v in (0.01, 0.05, 0.235, 0.6, 1.0):
            err = _otm_roundtrip(k, v)
            if err is not None:
                assert err <= 1e-10


def test_implied_vol_rejects_boundary_prices():
    with pytest.raises(PriceDomainError):
        bs.implied_vol(max(1.0 - np.exp(-0.1), 0.0), -0.1, 0.5)
    with pytest.raises(PriceDomainError):
        bs.implied_vol(1.0, 0.0, 0.5)
    with pytest.raises(PriceDomainError):
        bs.implied_vol(-0.01, 0.0, 0.5)


def test_flat_model_smile_recovers_sigma(flat_batch):
    # eta = 0, H = 0.5: implied vol must equal sqrt(xi0) at every strike
    sigma0 = flat_batch.params.sigma0
    for k in (-0.05, 0.0, 0.04):
        point = bs.smile_point(flat_batch, k)
        assert abs(point.sigma_bs - sigma0) <= max(point.ci, 1e-4)


def test_put_call_sides_agree(rough_batch):
    # OTM-put based vol at k<0 vs the call estimator at the same strike
    k = -0.03
    put_point = bs.smile_point(rough_batch, k)
    call_payoff = np.maximum(np.exp(rough_batch.x_t) - np.exp(k), 0.0)
    price = call_payoff.mean()
    call_sigma = bs.implied_vol(price, k, rough_batch.maturity, "call")
    se = call_payoff.std(ddof=1) / np.sqrt(rough_batch.n_samples)
    vega = np.sqrt(rough_batch.maturity) * bs.bs_vega_total(
        k, call_sigma * np.sqrt(rough_batch.maturity))
    call_ci = 1.96 * se / vega
    assert abs(put_point.sigma_bs - call_sigma) <= np.hypot(put_point.ci, call_ci)


def test_skew_formula_exact_bs_inputs_vanish():
    # with tail probability N(d2) the numerator cancels identically
    for k in (-0.2, 0.0, 0.15):
        for sigma in (0.1, 0.3):
            t = 0.3
            v = sigma * np.sqrt(t)
            d2 = -k / v - 0.5 * v
            assert bs.skew_formula(sigma, float(ndtr(d2)), k, t) == pytest.approx(
                0.0, abs=1e-10)


def test_implied_skew_zero_for_uncorrelated():
    from roughlocalvol.params import ModelParams, SimulationGrid
    from roughlocalvol.rbergomi import simulate_batch
    params = ModelParams(rho=0.0, hurst=0.3)
    rho0 = simulate_batch(params, SimulationGrid(0.1, 64), 55, 50_000)
    est = bs.implied_skew(rho0, 0.0)
    assert abs(est.value) <= 3 * est.ci


def test_fd_skew_matches_representation(rough_batch):
    atm = bs.implied_skew(rough_batch, 0.0)
    fd = bs.fd_skew_bs(rough_batch, 0.05)
    assert abs(fd.value - atm.value) <= np.hypot(fd.ci, atm.ci) + 0.05 * abs(atm.value)


def test_fd_skew_rejects_zero_offset(rough_batch):
    with pytest.raises(ValueError):
        bs.fd_skew_bs(rough_batch, 0.0)
