import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughlocalvol import asymptotics as asym
from roughlocalvol.errors import ExtrapolationRangeError
from roughlocalvol.params import ModelParams, SimulationGrid
from roughlocalvol.rate_function import RateSolution, limiting_smile
from roughlocalvol.rbergomi import simulate_batch


def test_skew_ratio_targets_exact():
    for hurst, target in ((0.1, 0.625), (0.3, 5.0 / 9.0), (0.5, 0.5)):
        assert 1.0 / (hurst + 1.5) == pytest.approx(target, abs=1e-15)


def test_skew_ratio_undefined_for_uncorrelated():
    params = ModelParams(rho=0.0, hurst=0.3)
    batch = simulate_batch(params, SimulationGrid(0.1, 64), 17, 30_000)
    point = asym.skew_ratio_curve([batch])[0]
    assert not point.defined
    assert np.isnan(point.ratio)


def test_skew_ratio_near_target(make_batch):
    batch = make_batch(hurst=0.3, maturity=0.05, n_steps=128,
                       n_samples=60_000, seed=31)
    point = asym.skew_ratio_curve([batch])[0]
    assert point.defined
    assert point.target == pytest.approx(5.0 / 9.0)
    assert abs(point.ratio - point.target) <= max(2 * point.ci, 0.08)


# --- harmonic mean ------------------------------------------------------------

def test_harmonic_mean_of_constant_is_exact():
    for k in (-0.4, -0.01, 0.02, 0.5):
        assert asym.harmonic_mean(lambda y: 0.3, k) == pytest.approx(
            0.3, abs=1e-14)


def test_harmonic_mean_at_zero_is_local_value():
    assert asym.harmonic_mean(lambda y: 0.2 + y, 0.0) == 0.2


def test_harmonic_mean_linear_vol_log_integral():
    # k / int_0^k dy/(0.2 + 0.1 y) = 0.1 / (10 log(0.21/0.2)), frozen from
    # the analytic antiderivative
    got = asym.harmonic_mean(lambda y: 0.2 + 0.1 * y, 0.1, n_points=2001)
    assert got == pytest.approx(0.20495934314287872, abs=1e-9)


@given(st.lists(st.floats(0.05, 1.0), min_size=3, max_size=12),
       st.floats(-0.4, 0.4))
@settings(max_examples=50, deadline=None)
def test_harmonic_mean_between_extremes(values, k):
    values = np.asarray(values)
    grid = np.linspace(0.0, k if k != 0.0 else 1.0, values.size)

    def sigma(y):
        return float(np.interp(y, np.sort(grid), values))

    h = asym.harmonic_mean(sigma, k)
    assert values.min() - 1e-12 <= h <= values.max() + 1e-12


def test_harmonic_mean_rejects_nonpositive_vol():
    with pytest.raises(ValueError):
        asym.harmonic_mean(lambda y: -0.1, 0.2)


def test_harmonic_report_flat_model(flat_batch):
    rows = asym.harmonic_failure_report(flat_batch, [-0.04, 0.0, 0.03])
    for row in rows:
        assert abs(row.ratio - 1.0) <= max(row.ci, 2e-3)


# --- Dupire diagnostic ---------------------------------------------------------

def test_dupire_flat_surface():
    point = asym.dupire_check(lambda t, k: 0.25, t=0.2, k=0.05)
    assert point.ok
    assert point.sigma_loc == pytest.approx(0.25, abs=1e-12)


def test_dupire_flags_nonpositive():
    # steep short-end term structure drives the numerator negative
    point = asym.dupire_check(lambda t, k: 0.2 - 1.5 * t, t=0.1, k=0.0)
    assert not point.ok
    assert np.isnan(point.sigma_loc)


def test_dupire_flat_model_consistency(flat_batch):
    from roughlocalvol.black_scholes import smile_point

    sigma0 = flat_batch.params.sigma0

    def surface(t, k):
        # eta = 0 model: flat in t and k up to Monte Carlo noise; evaluate
        # from the batch at its own maturity and analytics elsewhere
        return smile_point(flat_batch, k).sigma_bs if t == flat_batch.maturity \
            else sigma0

    # second differences amplify the ~2e-3 vol noise by t/dk^2: budget for it
    point = asym.dupire_check(surface, flat_batch.maturity, 0.0, dk=0.08)
    assert point.ok
    assert abs(point.sigma_loc - sigma0) <= 0.02


def test_dupire_cross_validates_ratio_estimator(make_batch):
    from roughlocalvol.black_scholes import smile_point
    from roughlocalvol.markov_projection import local_vol_ratio

    batches = {t: make_batch(hurst=0.3, maturity=t, n_steps=64,
                             n_samples=60_000, seed=404)
               for t in (0.08, 0.1, 0.12)}

    def surface(t, k):
        return smile_point(batches[round(t, 6)], k).sigma_bs

    point = asym.dupire_check(surface, 0.1, -0.02, dt=0.02, dk=0.06)
    assert point.ok
    ref = local_vol_ratio(batches[0.1], -0.02)
    # combined Monte Carlo CI plus a finite-difference bias/noise budget
    assert abs(point.sigma_loc - ref.sigma_loc) <= ref.ci + 0.025


# --- LDP diagnostic ------------------------------------------------------------

def test_ldp_positive_and_median_scale(make_batch):
    batches = [make_batch(hurst=0.1, maturity=t, n_steps=64, seed=77)
               for t in (0.05, 0.1)]
    points = asym.ldp_diagnostic(batches, 0.15, reference=0.3)
    assert len(points) == 2
    for p in points:
        assert p.value > 0.0
        assert p.reference == 0.3
    # y = 0: tail probability near 1/2, rescaled value near 0
    atm = asym.ldp_diagnostic(batches, 0.0, reference=0.0)
    for p in atm:
        assert 0.3 < p.tail_prob < 0.7
        assert abs(p.value) < 0.5


def test_ldp_drops_empty_tails(make_batch):
    batch = make_batch(hurst=0.1, maturity=0.05, n_steps=64)
    with pytest.warns(UserWarning, match="empty tail"):
        points = asym.ldp_diagnostic([batch], 5.0, reference=1.0)
    assert points == []


# --- extrapolation -------------------------------------------------------------

def _fake_solutions(y_grid, values):
    return [RateSolution(y=float(y), coeffs=np.zeros(1), rate=abs(y),
                         h_hat_1=0.0, sigma_limit=float(v), chi=0.2)
            for y, v in zip(y_grid, values)]


def test_extrapolation_matches_grid_nodes():
    ys = np.linspace(-0.3, 0.3, 13)
    vals = 0.2 + 0.1 * ys
    sols = _fake_solutions(ys, vals)
    # H = 0.5: y = k, values read straight off the grid
    assert asym.extrapolate_local_vol(sols, 0.5, t=0.07, k=0.1) == pytest.approx(
        0.21, abs=1e-12)


def test_extrapolation_atm_is_spot_vol():
    params = ModelParams()
    sols = limiting_smile([-0.1, 0.0, 0.1], params)
    for t in (0.01, 0.1, 0.3):
        got = asym.extrapolate_local_vol(sols, params.hurst, t, 0.0)
        assert got == pytest.approx(params.sigma0, abs=1e-10)


def test_extrapolation_brownian_is_maturity_free():
    ys = np.linspace(-0.3, 0.3, 13)
    sols = _fake_solutions(ys, 0.25 + 0.05 * ys**2)
    a = asym.extrapolate_local_vol(sols, 0.5, t=0.5, k=0.2)
    b = asym.extrapolate_local_vol(sols, 0.5, t=0.001, k=0.2)
    assert a == b


def test_extrapolation_rescales_strike():
    ys = np.linspace(-0.3, 0.3, 61)
    sols = _fake_solutions(ys, 0.2 - 0.1 * ys)
    # H = 0.1, T = 0.01, k = -0.02: y = -0.02 / 0.01^0.4 = -0.1262...
    y = -0.02 / 0.01**0.4
    got = asym.extrapolate_local_vol(sols, 0.1, t=0.01, k=-0.02)
    assert got == pytest.approx(0.2 - 0.1 * y, abs=1e-12)


def test_extrapolation_out_of_grid_raises():
    sols = _fake_solutions([-0.1, 0.0, 0.1], [0.2, 0.2, 0.2])
    with pytest.raises(ExtrapolationRangeError):
        asym.extrapolate_local_vol(sols, 0.1, t=0.01, k=-0.05)


def test_extrapolation_continuous_in_inputs():
    ys = np.linspace(-0.3, 0.3, 13)
    sols = _fake_solutions(ys, 0.2 + 0.1 * np.abs(ys))
    base = asym.extrapolate_local_vol(sols, 0.2, t=0.04, k=0.01)
    near_k = asym.extrapolate_local_vol(sols, 0.2, t=0.04, k=0.010001)
    near_t = asym.extrapolate_local_vol(sols, 0.2, t=0.040001, k=0.01)
    assert abs(near_k - base) < 1e-4
    assert abs(near_t - base) < 1e-4
