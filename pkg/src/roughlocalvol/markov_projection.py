"""Local volatility (Markovian projection) estimators and the local-skew formula.

sigma_loc^2(t, k) = E[V_t | X_t = k] is estimated two independent ways: a
Nadaraya-Watson kernel regression on (X_T, V_T), and a bandwidth-free ratio of
expectations obtained from the Gaussian law of X_t conditional on the
volatility path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSupportError, UnstableEstimateError
from .mc_stats import Estimate, delta_method, mean_with_se
from .rbergomi import PathBatch

#: kernel points where fewer samples than this carry 99% of the total weight
#: are flagged unreliable (noisy wings) rather than rejected
_MIN_EFFECTIVE_SAMPLES = 50


@dataclass(frozen=True)
class LocalVolPoint:
    """Local volatility estimate at (t, k), tagged by estimation method."""

    t: float
    k: float
    sigma_loc: float
    ci: float
    method: str
    reliable: bool = True

    def agrees_with(self, other: "LocalVolPoint") -> bool:
        return abs(self.sigma_loc - other.sigma_loc) <= np.hypot(self.ci, other.ci)


def default_bandwidth(batch: PathBatch) -> float:
    """
    Gaussian-kernel parameter delta in exp(-delta x^2), from the Silverman
    rule b = 1.06 std(X_T) M^(-1/5) via delta = 1 / (2 b^2).
    """
    b = 1.06 * float(np.std(batch.x_t)) * batch.n_samples ** (-0.2)
    if b == 0.0:
        return 1.0  # single sample or degenerate spread; weights cancel anyway
    return 1.0 / (2.0 * b * b)


def local_vol_kernel(batch: PathBatch, k: float,
                     bandwidth: float | None = None) -> LocalVolPoint:
    """
    Nadaraya-Watson estimate sqrt(sum V e^(-delta (X-k)^2) / sum e^(-delta (X-k)^2)).
    """
    delta = default_bandwidth(batch) if bandwidth is None else bandwidth
    expo = -delta * (batch.x_t - k) ** 2
    if np.max(expo) < np.log(1e-300):
        raise DegenerateSupportError(
            f"all kernel weights below 1e-300 at k={k:.6g} (delta={delta:.6g})"
        )
    weights = np.exp(expo)
    est = delta_method(
        [batch.v_t * weights, weights],
        lambda means: np.sqrt(means[0] / means[1]),
    )
    # effective support: samples carrying 99% of the kernel mass
    ordered = np.sort(weights)[::-1]
    n_eff = int(np.searchsorted(np.cumsum(ordered), 0.99 * ordered.sum())) + 1
    return LocalVolPoint(t=batch.maturity, k=k, sigma_loc=est.value, ci=est.ci,
                         method="kernel", reliable=n_eff >= _MIN_EFFECTIVE_SAMPLES)


def pi_weights(batch: PathBatch, k: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Conditional-Gaussian weights per sample:

        U = k + 1/2 int V dt - rho int sqrt(V) dW
        Pi = exp(-U^2 / (2 (1-rho^2) int V dt)) / sqrt(int V dt)

    so that sigma_loc^2(t, k) = E[V_T Pi] / E[Pi].
    """
    rho = batch.params.rho
    rho_bar_sq = 1.0 - rho * rho
    u = k + 0.5 * batch.int_v - rho * batch.int_sqrtv_dw
    pi = np.exp(-u * u / (2.0 * rho_bar_sq * batch.int_v)) / np.sqrt(batch.int_v)
    return pi, u


def local_vol_ratio(batch: PathBatch, k: float) -> LocalVolPoint:
    """Bandwidth-free estimate sqrt(E[V Pi] / E[Pi])."""
    pi, _ = pi_weights(batch, k)
    if not np.mean(pi) > 0.0:
        raise DegenerateSupportError(
            f"all conditional weights underflowed at k={k:.6g}")
    est = delta_method(
        [batch.v_t * pi, pi],
        lambda means: np.sqrt(means[0] / means[1]),
    )
    return LocalVolPoint(t=batch.maturity, k=k, sigma_loc=est.value, ci=est.ci,
                         method="ratio")


def local_skew(batch: PathBatch, k: float) -> Estimate:
    """
    d sigma_loc/dk at (t, k) by differentiating the ratio representation:

        (E[V Pi] E[U Pi / I] - E[U Pi V / I] E[Pi])
            / (2 (1-rho^2) E[V Pi]^(1/2) E[Pi]^(3/2)),

    with I = int V dt.  All four means come from the same batch; the CI is the
    delta method over their joint empirical covariance.
    """
    rho_bar_sq = 1.0 - batch.params.rho ** 2
    pi, u = pi_weights(batch, k)
    v_pi = batch.v_t * pi
    u_pi_over_i = u * pi / batch.int_v

    _, se_pi = mean_with_se(pi)
    if not np.mean(pi) > 10.0 * se_pi:
        raise UnstableEstimateError(
            f"E[Pi] at k={k:.6g} is below 10x its standard error"
        )

    def from_means(means: np.ndarray) -> float:
        a, b, c, d = means
        return (a * b - c * d) / (2.0 * rho_bar_sq * np.sqrt(a) * d ** 1.5)

    return delta_method([v_pi, u_pi_over_i, u_pi_over_i * batch.v_t, pi],
                        from_means)


def fd_skew_loc(batch: PathBatch, y: float) -> Estimate:
    """
    Symmetric finite-difference local skew at strikes +/- y * t^(1/2 - H),
    built from the ratio estimator.
    """
    if y == 0.0:
        raise ValueError("y must be nonzero")
    dk = y * batch.maturity ** (0.5 - batch.params.hurst)
    hi = local_vol_ratio(batch, dk)
    lo = local_vol_ratio(batch, -dk)
    value = (hi.sigma_loc - lo.sigma_loc) / (2.0 * dk)
    ci = float(np.hypot(hi.ci, lo.ci) / abs(2.0 * dk))
    return Estimate(value=float(value), ci=ci)
