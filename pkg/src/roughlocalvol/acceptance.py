"""Acceptance gate: every headline claim checked at its pinned tolerance.

The gate runs at the desk profile (M = 2e5 samples, N = 256 steps) with the
configured seed; each criterion reports a measured value, its target, the
tolerance, and a pass/fail flag.  Targets can be overridden (negative
controls) through ``target_overrides``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import black_scholes as bs
from . import fbm
from . import markov_projection as mp
from .asymptotics import harmonic_failure_report, skew_ratio_curve
from .config import ExperimentConfig
from .experiments import get_batch, strikes_for
from .params import ModelParams, SimulationGrid
from .quadrature import legendre_rule_01
from .rate_function import basis_matrix, limiting_smile, minimize_rate, skew_constants
from .rbergomi import PathBatch, simulate_batch

ACCEPTANCE_HURSTS = (0.1, 0.3, 0.5)
_RATIO_MATURITIES = (0.05, 0.1)
_AGREEMENT_MATURITIES = (0.1, 0.3)
_CONVERGENCE_MATURITIES = (0.4, 0.2, 0.1, 0.05)
_AGREEMENT_Y = tuple(np.linspace(-0.25, 0.25, 11))
_CONVERGENCE_Y = tuple(np.linspace(-0.2, 0.2, 9))


@dataclass(frozen=True)
class CriterionResult:
    criterion: str
    passed: bool
    measured: str
    target: str
    tolerance: str

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.criterion}: measured {self.measured}, "
                f"target {self.target}, tolerance {self.tolerance}")


class BatchPool:
    """Lazily simulated (hurst, maturity) batches shared across criteria."""

    def __init__(self, config: ExperimentConfig, cache_dir=None):
        self.config = config
        self.cache_dir = cache_dir
        self._batches: dict[tuple[float, float], PathBatch] = {}

    def get(self, hurst: float, maturity: float,
            eta: float | None = None) -> PathBatch:
        eta = self.config.params.eta if eta is None else eta
        key = (hurst, maturity, eta)
        if key not in self._batches:
            params = replace(self.config.params, hurst=hurst, eta=eta)
            grid = SimulationGrid(maturity, self.config.n_steps)
            self._batches[key] = get_batch(params, grid, self.config.seed,
                                           self.config.n_samples, self.cache_dir)
        return self._batches[key]


def _override(overrides: Mapping[str, float] | None, key: str, default: float) -> float:
    if overrides and key in overrides:
        return overrides[key]
    return default


def check_skew_ratio(pool: BatchPool,
                     overrides: Mapping[str, float] | None = None) -> list[CriterionResult]:
    """ATM implied/local skew ratio within 0.06 of 1/(H+3/2) at T in {0.05, 0.1}."""
    results = []
    for hurst in ACCEPTANCE_HURSTS:
        target = _override(overrides, f"skew_ratio:H={hurst}", 1.0 / (hurst + 1.5))
        for t in _RATIO_MATURITIES:
            point = skew_ratio_curve([pool.get(hurst, t)])[0]
            passed = point.defined and abs(point.ratio - target) <= 0.06
            results.append(CriterionResult(
                criterion=f"1 skew-ratio H={hurst} T={t}", passed=passed,
                measured=f"{point.ratio:.4f}", target=f"{target:.4f}",
                tolerance="abs 0.06"))
    return results


def check_skew_power_law(pool: BatchPool) -> list[CriterionResult]:
    """log|ATM skew| vs log t slope equals H - 1/2 within 0.07, both estimators."""
    results = []
    maturities = pool.config.maturities
    log_t = np.log(maturities)
    for hurst in ACCEPTANCE_HURSTS:
        implied = []
        local = []
        for t in maturities:
            batch = pool.get(hurst, t)
            implied.append(abs(bs.implied_skew(batch, 0.0).value))
            local.append(abs(mp.local_skew(batch, 0.0).value))
        for name, series in (("implied", implied), ("local", local)):
            slope = float(np.polyfit(log_t, np.log(series), 1)[0])
            passed = abs(slope - (hurst - 0.5)) <= 0.07
            results.append(CriterionResult(
                criterion=f"2 skew-power-law {name} H={hurst}", passed=passed,
                measured=f"{slope:+.4f}", target=f"{hurst - 0.5:+.1f}",
                tolerance="abs 0.07"))
    return results


def check_estimator_agreement(pool: BatchPool) -> list[CriterionResult]:
    """Kernel and ratio local vols agree within combined 95% CIs at >= 95% of points."""
    agree = 0
    total = 0
    for hurst in ACCEPTANCE_HURSTS:
        for t in _AGREEMENT_MATURITIES:
            batch = pool.get(hurst, t)
            for k in strikes_for(batch, _AGREEMENT_Y):
                kern = mp.local_vol_kernel(batch, float(k),
                                           pool.config.bandwidth_delta)
                ratio = mp.local_vol_ratio(batch, float(k))
                agree += kern.agrees_with(ratio)
                total += 1
    fraction = agree / total
    return [CriterionResult(
        criterion="3 kernel-vs-ratio agreement", passed=fraction >= 0.95,
        measured=f"{fraction:.3f} ({agree}/{total})", target=">=0.95",
        tolerance="fraction of combined-CI overlaps")]


def check_rate_function(config: ExperimentConfig) -> list[CriterionResult]:
    """Flat-volatility closed form, the K1 identity, and Ritz monotonicity."""
    results = []
    flat = replace(config.params, eta=0.0)
    worst = 0.0
    for y in (0.1, -0.1, 0.2, -0.2):
        sol = minimize_rate(y, flat, config.ritz)
        worst = max(worst, abs(sol.rate - y**2 / (2.0 * flat.xi0)))
    results.append(CriterionResult(
        criterion="4a rate eta=0 closed form", passed=worst <= 1e-6,
        measured=f"max err {worst:.2e}", target="y^2/(2 xi0)",
        tolerance="abs 1e-6"))

    worst = 0.0
    for hurst in ACCEPTANCE_HURSTS:
        sc = skew_constants(replace(config.params, hurst=hurst))
        worst = max(worst, abs(sc.k1_at_one - (hurst + 1.5) * sc.k1_mean))
    results.append(CriterionResult(
        criterion="4b K1 identity", passed=worst <= 1e-8,
        measured=f"max err {worst:.2e}", target="K1(1)=(H+3/2)<K1,1>",
        tolerance="abs 1e-8"))

    monotone = True
    worst_gap = -np.inf
    for y in (0.1, -0.1, 0.2, -0.2, 0.3, -0.3):
        rates = [minimize_rate(y, config.params,
                               replace(config.ritz, n_basis=n)).rate
                 for n in (2, 4, 8)]
        gaps = (rates[2] - rates[1], rates[1] - rates[0])
        worst_gap = max(worst_gap, *gaps)
        monotone &= all(g <= 1e-10 for g in gaps)
    results.append(CriterionResult(
        criterion="4c Ritz monotonicity", passed=monotone,
        measured=f"max increase {worst_gap:.2e}",
        target="rate(N=8) <= rate(N=4) <= rate(N=2)", tolerance="slack 1e-10"))
    return results


def _rescaled_error(pool: BatchPool, hurst: float, maturity: float,
                    limits: np.ndarray) -> float:
    batch = pool.get(hurst, maturity)
    ks = strikes_for(batch, _CONVERGENCE_Y)
    est = np.array([mp.local_vol_ratio(batch, float(k)).sigma_loc for k in ks])
    return float(np.max(np.abs(est - limits)))


def check_limit_convergence(pool: BatchPool) -> list[CriterionResult]:
    """Max |rescaled local vol - limit| decreasing in T (H=0.3); rougher H errs more."""
    limits = {}
    for hurst in ACCEPTANCE_HURSTS:
        params = replace(pool.config.params, hurst=hurst)
        sols = limiting_smile(_CONVERGENCE_Y, params, pool.config.ritz)
        limits[hurst] = np.array([s.sigma_limit for s in sols])

    errs = [_rescaled_error(pool, 0.3, t, limits[0.3])
            for t in _CONVERGENCE_MATURITIES]
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    results = [CriterionResult(
        criterion="5 limit convergence H=0.3", passed=monotone,
        measured=" > ".join(f"{e:.4f}" for e in errs),
        target="decreasing across T=0.4,0.2,0.1,0.05", tolerance="ordering")]

    err_rough = _rescaled_error(pool, 0.1, 0.05, limits[0.1])
    err_diffusive = _rescaled_error(pool, 0.5, 0.05, limits[0.5])
    results.append(CriterionResult(
        criterion="5 rougher-H error ordering", passed=err_rough > err_diffusive,
        measured=f"err(H=0.1)={err_rough:.4f}, err(H=0.5)={err_diffusive:.4f}",
        target="err(H=0.1) > err(H=0.5) at T=0.05", tolerance="ordering"))
    return results


def check_harmonic_dichotomy(pool: BatchPool) -> list[CriterionResult]:
    """sigma_BS/harmonic-mean at T=0.05, k=-0.15: near 1 iff the driver is diffusive."""
    row_diffusive = harmonic_failure_report(pool.get(0.5, 0.05), [-0.15])[0]
    row_rough = harmonic_failure_report(pool.get(0.1, 0.05), [-0.15])[0]
    results = [CriterionResult(
        criterion="6 harmonic mean H=0.5",
        passed=abs(row_diffusive.ratio - 1.0) < 0.03,
        measured=f"|ratio-1|={abs(row_diffusive.ratio - 1.0):.4f}",
        target="<0.03", tolerance="abs")]
    gap = row_rough.ratio - 1.0
    results.append(CriterionResult(
        criterion="6 harmonic mean H=0.1",
        passed=gap > 0.05 and gap - row_rough.ci > 0.0,
        measured=f"ratio-1={gap:.4f} (ci {row_rough.ci:.4f})",
        target=">0.05 with CI excluding 0", tolerance="abs"))
    return results


def check_deterministic_numerics(config: ExperimentConfig) -> list[CriterionResult]:
    """Round trips, exact Gaussian marginals, quadrature identities, byte-stable reruns."""
    results = []

    worst = 0.0
    for k in np.linspace(-0.5, 0.5, 11):
        # out-of-the-money side, as used by the smile estimators
        option = "put" if k < 0.0 else "call"
        pricer = bs.bs_put if k < 0.0 else bs.bs_call
        for sigma in (0.05, 0.1, 0.235, 0.5, 1.0):
            for t in (0.05, 0.5):
                price = pricer(k, sigma * np.sqrt(t))
                if price <= 0.0:
                    continue  # wings where the price underflows
                worst = max(worst, abs(
                    bs.implied_vol(price, float(k), t, option) - sigma))
    results.append(CriterionResult(
        criterion="7 implied-vol round trip", passed=worst <= 1e-10,
        measured=f"max err {worst:.2e}", target="identity", tolerance="abs 1e-10"))

    worst = 0.0
    for hurst in ACCEPTANCE_HURSTS:
        cov = fbm.build_covariance(SimulationGrid(0.5, config.n_steps), hurst)
        low = fbm.factorize(cov)
        err = np.max(np.abs(low @ low.T - cov.matrix))
        worst = max(worst, err / np.max(np.diag(cov.matrix)))
    results.append(CriterionResult(
        criterion="7 Cholesky round trip", passed=worst <= 1e-10,
        measured=f"max rel err {worst:.2e}", target="L L^T = C",
        tolerance="1e-10 x max diagonal"))

    grid = SimulationGrid(1.0, 16)
    n_var = 100_000
    worst_z = 0.0
    for hurst in ACCEPTANCE_HURSTS:
        low = fbm.factorize(fbm.build_covariance(grid, hurst))
        _, w_hat, _ = fbm.sample_arrays(low, grid, config.seed, 0, n_var)
        for j, t in enumerate(grid.times):
            target = t ** (2.0 * hurst)
            se = target * np.sqrt(2.0 / (n_var - 1))
            worst_z = max(worst_z, abs(np.var(w_hat[:, j], ddof=1) - target) / se)
    results.append(CriterionResult(
        criterion="7 Var(What_t)=t^2H", passed=worst_z <= 5.0,
        measured=f"max |z| {worst_z:.2f}", target="exact marginal variance",
        tolerance="5 standard errors at M=1e5"))

    nodes, weights = legendre_rule_01(config.ritz.quad_nodes)
    basis = basis_matrix(8, nodes)
    gram = basis.T @ (weights[:, None] * basis)
    err = float(np.max(np.abs(gram - np.eye(8))))
    results.append(CriterionResult(
        criterion="7 basis orthonormality", passed=err <= 1e-10,
        measured=f"max err {err:.2e}", target="identity Gram matrix",
        tolerance="abs 1e-10"))

    small = ModelParams()
    small_grid = SimulationGrid(0.1, 16)
    texts = []
    for _ in range(2):
        batch = simulate_batch(small, small_grid, config.seed, 2000)
        buf = io.StringIO()
        batch.write_csv(buf)
        texts.append(buf.getvalue())
    results.append(CriterionResult(
        criterion="7 byte-identical rerun", passed=texts[0] == texts[1],
        measured="identical" if texts[0] == texts[1] else "mismatch",
        target="bitwise equal artifacts", tolerance="exact"))
    return results


def run_acceptance(config: ExperimentConfig, cache_dir=None,
                   target_overrides: Mapping[str, float] | None = None,
                   verbose: bool = True) -> list[CriterionResult]:
    """Run all acceptance criteria and return their results in order."""
    pool = BatchPool(config, cache_dir)
    results = []
    results += check_skew_ratio(pool, target_overrides)
    results += check_skew_power_law(pool)
    results += check_estimator_agreement(pool)
    results += check_rate_function(config)
    results += check_limit_convergence(pool)
    results += check_harmonic_dichotomy(pool)
    results += check_deterministic_numerics(config)
    if verbose:
        for result in results:
            print(result.line())
    return results
