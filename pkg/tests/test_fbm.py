import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from roughlocalvol import fbm
from roughlocalvol.errors import FactorizationError
from roughlocalvol.params import SimulationGrid


def test_kernel_zero_at_or_below_diagonal():
    assert fbm.kernel_eval(1.0, 1.0, 0.3) == 0.0
    assert fbm.kernel_eval(0.5, 0.9, 0.3) == 0.0


def test_kernel_brownian_case():
    assert fbm.kernel_eval(1.0, 0.0, 0.5) == 1.0


def test_kernel_rough_value():
    # sqrt(0.2) * 0.5^(-0.4), frozen from a high-precision scalar evaluation
    assert fbm.kernel_eval(1.0, 0.5, 0.1) == pytest.approx(
        0.59010187706738373, abs=1e-15)


def test_kernel_vectorized_matches_scalar():
    t = np.array([0.2, 0.5, 1.0])
    out = fbm.kernel_eval(t, 0.3, 0.2)
    expected = [fbm.kernel_eval(float(ti), 0.3, 0.2) for ti in t]
    assert np.allclose(out, expected)
    assert out[0] == 0.0  # t < s entry


@given(st.floats(0.01, 0.5), st.floats(0.0, 2.0), st.floats(1e-3, 2.0))
@settings(max_examples=50, deadline=None)
def test_kernel_nonnegative(hurst, s, gap):
    assert fbm.kernel_eval(s + gap, s, hurst) >= 0.0


# --- covariance assembly ----------------------------------------------------

def _hat_cov_oracle(s, t, hurst):
    # Gauss hypergeometric closed form, independent of the quadrature path
    lo, hi = min(s, t), max(s, t)
    if lo == hi:
        return lo ** (2.0 * hurst)
    return (2.0 * hurst * lo ** (hurst + 0.5) * hi ** (hurst - 0.5)
            / (hurst + 0.5)
            * special.hyp2f1(1.0, 0.5 - hurst, 1.5 + hurst, lo / hi))


@pytest.mark.parametrize("hurst", [0.1, 0.25, 0.4, 0.5])
def test_covariance_entries(hurst):
    grid = SimulationGrid(maturity=0.7, n_steps=12)
    cov = fbm.build_covariance(grid, hurst)
    n = grid.n_steps
    times = grid.times
    mat = cov.matrix
    assert np.array_equal(mat, mat.T)
    # W block is the Brownian min-covariance
    assert np.array_equal(mat[:n, :n], np.minimum.outer(times, times))
    # What diagonal is t^(2H)
    assert np.allclose(np.diag(mat[n:, n:]), times ** (2 * hurst), rtol=1e-14)
    # What off-diagonal against the hypergeometric oracle
    for i in range(0, n, 3):
        for j in range(0, n, 4):
            assert mat[n + i, n + j] == pytest.approx(
                _hat_cov_oracle(times[i], times[j], hurst), abs=1e-12)
    # cross block Cov(W_{t_i}, What_{t_j}) against direct quadrature
    for i, j in [(2, 7), (7, 2), (11, 11)]:
        oracle = np.sqrt(2 * hurst) * integrate.quad(
            lambda u: (times[j] - u) ** (hurst - 0.5),
            0.0, min(times[i], times[j]), points=[times[j]])[0]
        assert mat[i, n + j] == pytest.approx(oracle, abs=1e-10)


def test_covariance_cross_value_at_one():
    grid = SimulationGrid(maturity=1.0, n_steps=4)
    cov = fbm.build_covariance(grid, 0.1)
    # Cov(W_1, What_1) = sqrt(2H)/(H+1/2) = sqrt(0.2)/0.6
    assert cov.matrix[3, 7] == pytest.approx(0.74535599249992990, abs=1e-14)


def test_covariance_brownian_reduction():
    grid = SimulationGrid(maturity=0.5, n_steps=10)
    cov = fbm.build_covariance(grid, 0.5)
    n = grid.n_steps
    w_block = cov.matrix[:n, :n]
    assert np.array_equal(cov.matrix[n:, n:], w_block)
    assert np.allclose(cov.matrix[:n, n:], w_block, atol=1e-15)


# --- factorization ----------------------------------------------------------

def test_factorize_scalar():
    assert fbm.factorize(np.array([[0.3**0.4]]))[0, 0] == pytest.approx(
        0.3**0.2, rel=1e-15)


def test_factorize_identity():
    assert np.array_equal(fbm.factorize(np.eye(5)), np.eye(5))


def test_factorize_brownian_2x2():
    cov = np.array([[0.5, 0.5], [0.5, 1.0]])
    low = fbm.factorize(cov)
    expected = np.array([[np.sqrt(0.5), 0.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    assert np.allclose(low, expected, rtol=1e-15)


@pytest.mark.parametrize("hurst", [0.1, 0.3, 0.5])
def test_factorize_roundtrip(hurst):
    grid = SimulationGrid(maturity=0.5, n_steps=32)
    cov = fbm.build_covariance(grid, hurst)
    low = fbm.factorize(cov)
    assert np.array_equal(np.triu(low, k=1), np.zeros_like(low))
    err = np.max(np.abs(low @ low.T - cov.matrix))
    assert err <= 1e-10 * np.max(np.diag(cov.matrix))


def test_factorize_deterministic():
    grid = SimulationGrid(maturity=0.5, n_steps=16)
    cov = fbm.build_covariance(grid, 0.2)
    assert np.array_equal(fbm.factorize(cov), fbm.factorize(cov))


def test_factorize_rejects_asymmetric():
    with pytest.raises(ValueError):
        fbm.factorize(np.array([[1.0, 0.1], [0.2, 1.0]]))


def test_factorize_rejects_indefinite():
    bad = np.array([[1.0, 0.0], [0.0, -0.5]])
    with pytest.raises(FactorizationError, match="negative pivot"):
        fbm.factorize(bad)


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_factorize_random_psd(seed):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((6, 4))
    cov = b @ b.T  # rank-deficient PSD
    cov = 0.5 * (cov + cov.T)
    low = fbm.factorize(cov)
    assert np.max(np.abs(low @ low.T - cov)) <= 1e-10 * max(np.max(np.diag(cov)), 1.0)


# --- sampling ---------------------------------------------------------------

def _factor(maturity, n_steps, hurst):
    grid = SimulationGrid(maturity=maturity, n_steps=n_steps)
    return fbm.factorize(fbm.build_covariance(grid, hurst)), grid


def test_sampling_deterministic_and_chunk_invariant():
    low, grid = _factor(1.0, 8, 0.2)
    first = next(fbm.sample_batch(low, grid, seed=99, n_samples=3))
    again = next(fbm.sample_batch(low, grid, seed=99, n_samples=3))
    assert np.array_equal(first.w, again.w)
    assert np.array_equal(first.w_hat, again.w_hat)
    assert np.array_equal(first.w_bar_incr, again.w_bar_incr)
    # draws are pure in (seed, index): slicing anywhere gives the same bits
    w_a, hat_a, bar_a = fbm.sample_arrays(low, grid, 99, 5000, 5100)
    w_b, hat_b, bar_b = fbm.sample_arrays(low, grid, 99, 0, 6000)
    assert np.array_equal(w_a, w_b[5000:5100])
    assert np.array_equal(hat_a, hat_b[5000:5100])
    assert np.array_equal(bar_a, bar_b[5000:5100])


def test_sampling_empty():
    low, grid = _factor(1.0, 4, 0.3)
    assert list(fbm.sample_batch(low, grid, seed=1, n_samples=0)) == []


def test_sampling_seed_sensitivity():
    low, grid = _factor(1.0, 4, 0.3)
    a = next(fbm.sample_batch(low, grid, seed=1, n_samples=1))
    b = next(fbm.sample_batch(low, grid, seed=2, n_samples=1))
    assert not np.array_equal(a.w, b.w)


def test_sampling_moments():
    n_samples = 120_000
    low, grid = _factor(1.0, 6, 0.1)
    w, w_hat, w_bar = fbm.sample_arrays(low, grid, 2024, 0, n_samples)
    times = grid.times
    for j, t in enumerate(times):
        target = t ** 0.2
        se = target * np.sqrt(2.0 / (n_samples - 1))
        assert abs(np.var(w_hat[:, j], ddof=1) - target) <= 5 * se
        assert abs(np.mean(w_hat[:, j])) <= 4 * np.sqrt(target / n_samples)
    # terminal correlation: cross-covariance over sqrt(t) * t^H
    target_corr = np.sqrt(0.2) / 0.6
    sample_corr = np.corrcoef(w[:, -1], w_hat[:, -1])[0, 1]
    assert abs(sample_corr - target_corr) <= 5.0 / np.sqrt(n_samples)
    # Wbar increments: independent of the joint draw, variance dt
    assert abs(np.var(w_bar) - grid.dt) <= 5 * grid.dt * np.sqrt(2.0 / n_samples)
    corr_bar = np.corrcoef(w_bar[:, 2], w[:, -1])[0, 1]
    assert abs(corr_bar) <= 5.0 / np.sqrt(n_samples)


def test_brownian_case_hat_equals_w():
    low, grid = _factor(0.7, 16, 0.5)
    w, w_hat, _ = fbm.sample_arrays(low, grid, 11, 0, 2000)
    assert np.max(np.abs(w - w_hat)) < 1e-12


def test_scaled_factor_matches_direct():
    grid = SimulationGrid(maturity=0.3, n_steps=16)
    direct = fbm.factorize(fbm.build_covariance(grid, 0.2))
    scaled = fbm.scaled_factor(grid, 0.2)
    assert np.allclose(scaled @ scaled.T, direct @ direct.T, atol=1e-14)


def test_covariance_csv_dump(tmp_path):
    grid = SimulationGrid(maturity=0.5, n_steps=3)
    cov = fbm.build_covariance(grid, 0.3)
    path = tmp_path / "cov.csv"
    fbm.dump_covariance_csv(cov, path)
    loaded = np.loadtxt(path, delimiter=",")
    assert np.array_equal(loaded, cov.matrix)  # %.17g round-trips doubles
