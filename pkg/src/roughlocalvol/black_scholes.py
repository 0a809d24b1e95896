"""Black-Scholes pricing, implied-vol inversion, and implied-skew estimators.

Conventions: spot 1, zero rates.  Prices are parametrized by log-moneyness k
and total volatility v = sqrt(t) * sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConvergenceError, PriceDomainError, UnstableEstimateError
from .mc_stats import Z95, Estimate, delta_method, mean_with_se
from .rbergomi import PathBatch

_SQRT_2PI = np.sqrt(2.0 * np.pi)
_VEGA_FLOOR = 1e-12
_PRICE_TOL = 1e-12
_SIGMA_TOL = 1e-11
_SIGMA_LO, _SIGMA_HI = 1e-6, 5.0


def _phi(x):
    return np.exp(-0.5 * np.asarray(x) ** 2) / _SQRT_2PI


def bs_call(k, v):
    """Call price N(d1) - e^k N(d2), d2 = -k/v - v/2, d1 = d2 + v; intrinsic at v = 0."""
    k = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = -k / v - 0.5 * v
        price = np.where(v > 0.0,
                         ndtr(d2 + v) - np.exp(k) * ndtr(d2),
                         np.maximum(1.0 - np.exp(k), 0.0))
    if price.ndim == 0:
        return float(price)
    return price


def bs_put(k, v):
    """Put price e^k N(-d2) - N(-d1); intrinsic at v = 0."""
    k = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = -k / v - 0.5 * v
        price = np.where(v > 0.0,
                         np.exp(k) * ndtr(-d2) - ndtr(-d2 - v),
                         np.maximum(np.exp(k) - 1.0, 0.0))
    if price.ndim == 0:
        return float(price)
    return price


def bs_vega_total(k, v):
    """Derivative of the call (or put) price with respect to total volatility v."""
    d1 = -np.asarray(k) / v + 0.5 * v
    return _phi(d1)


def implied_vol(price: float, k: float, t: float, option: str = "call") -> float:
    """
    Invert the Black-Scholes price for sigma by Newton's method with a
    bisection safeguard on sigma in [1e-6, 5].

    The price must lie strictly inside the no-arbitrage band; the result
    reproduces the price to within 1e-12 (absolute, spot = 1).
    """
    if option == "call":
        intrinsic, upper, pricer = max(1.0 - np.exp(k), 0.0), 1.0, bs_call
    elif option == "put":
        intrinsic, upper, pricer = max(np.exp(k) - 1.0, 0.0), np.exp(k), bs_put
    else:
        raise ValueError(f"option must be 'call' or 'put', got {option!r}")
    if not intrinsic < price < upper:
        raise PriceDomainError(
            f"price {price:.6g} outside the open band ({intrinsic:.6g}, {upper:.6g}) "
            f"for {option} at k={k:.6g}"
        )
    sqrt_t = np.sqrt(t)
    if abs(k) < 1e-6:
        sigma = price * _SQRT_2PI / sqrt_t  # ATM expansion C ~ sigma sqrt(t/2pi)
    else:
        sigma = 0.3
    lo, hi = _SIGMA_LO, _SIGMA_HI
    sigma = min(max(sigma, lo), hi)
    log_price = np.log(price)
    for _ in range(100):
        value = pricer(k, sigma * sqrt_t)
        diff = value - price
        if diff > 0.0:
            hi = sigma
        else:
            lo = sigma
        vega = sqrt_t * bs_vega_total(k, sigma * sqrt_t)
        if value > 0.0 and vega > 0.0:
            # Newton on log prices: stays well-scaled in the far wings where
            # the price decays doubly exponentially in sigma
            step = (np.log(value) - log_price) * value / vega
        else:
            step = np.inf
        # require both a reproduced price and a resolved sigma: tiny prices
        # leave |diff| small for a whole band of sigmas
        if abs(diff) <= _PRICE_TOL and abs(step) <= _SIGMA_TOL:
            return float(min(max(sigma - step, lo), hi))
        candidate = sigma - step
        sigma = candidate if lo < candidate < hi else 0.5 * (lo + hi)
    raise ConvergenceError(
        f"implied vol iteration did not reach {_PRICE_TOL:g} at k={k:.6g}",
        last_iterate=sigma,
    )


@dataclass(frozen=True)
class ImpliedPoint:
    """Implied volatility at (t, k) with its Monte Carlo half-width."""

    t: float
    k: float
    sigma_bs: float
    ci: float


def _otm_payoffs(batch: PathBatch, k: float) -> tuple[np.ndarray, str]:
    # out-of-the-money side: puts below the money, calls at or above
    if k < 0.0:
        return np.maximum(np.exp(k) - np.exp(batch.x_t), 0.0), "put"
    return np.maximum(np.exp(batch.x_t) - np.exp(k), 0.0), "call"


def smile_point(batch: PathBatch, k: float) -> ImpliedPoint:
    """
    Implied volatility from the out-of-the-money empirical option price, the
    Monte Carlo CI mapped through the price -> vol derivative.
    """
    t = batch.maturity
    payoff, option = _otm_payoffs(batch, k)
    price, se = mean_with_se(payoff)
    sigma = implied_vol(price, k, t, option)
    vega_sigma = np.sqrt(t) * bs_vega_total(k, sigma * np.sqrt(t))
    return ImpliedPoint(t=t, k=k, sigma_bs=sigma, ci=float(Z95 * se / vega_sigma))


def skew_formula(sigma: float, tail_prob: float, k: float, t: float) -> float:
    """
    Implied-vol slope in k from the identity obtained by differentiating the
    implied-vol definition:

        d sigma/dk = (N(d2) - P(X_t >= k)) / (sqrt(t) phi(d2)),

    with d2 evaluated at v = sqrt(t) sigma.  Finite-difference free.
    """
    v = np.sqrt(t) * sigma
    d2 = -k / v - 0.5 * v
    denom = np.sqrt(t) * _phi(d2)
    if denom < _VEGA_FLOOR:
        raise UnstableEstimateError(
            f"vega floor hit at k={k:.6g}, t={t:.6g}: sqrt(t) phi(d2)={denom:.3g}"
        )
    return float((ndtr(d2) - tail_prob) / denom)


def implied_skew(batch: PathBatch, k: float) -> Estimate:
    """
    Estimate d sigma_BS/dk at (t, k) from a single batch: the implied vol and
    the tail probability P(X_t >= k) enter the finite-difference-free formula,
    and the CI follows from the delta method on their joint sample.
    """
    t = batch.maturity
    payoff, option = _otm_payoffs(batch, k)
    indicator = (batch.x_t >= k).astype(float)

    def from_means(means: np.ndarray) -> float:
        sigma = implied_vol(float(means[0]), k, t, option)
        return skew_formula(sigma, float(means[1]), k, t)

    return delta_method([payoff, indicator], from_means)


def fd_skew_bs(batch: PathBatch, y: float) -> Estimate:
    """
    Symmetric finite-difference skew at strikes +/- y * t^(1/2 - H):

        (sigma_BS(t, y t^(1/2-H)) - sigma_BS(t, -y t^(1/2-H))) / (2 y t^(1/2-H)).
    """
    if y == 0.0:
        raise ValueError("y must be nonzero")
    t = batch.maturity
    dk = y * t ** (0.5 - batch.params.hurst)
    hi = smile_point(batch, dk)
    lo = smile_point(batch, -dk)
    value = (hi.sigma_bs - lo.sigma_bs) / (2.0 * dk)
    ci = float(np.hypot(hi.ci, lo.ci) / abs(2.0 * dk))
    return Estimate(value=float(value), ci=ci)
