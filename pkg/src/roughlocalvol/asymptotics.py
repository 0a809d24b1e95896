"""Headline short-maturity comparisons: skew ratio, harmonic mean, Dupire,
large-deviations diagnostics, and the short-maturity local-vol extrapolation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .black_scholes import implied_skew, smile_point
from .errors import ExtrapolationRangeError
from .markov_projection import local_skew, local_vol_ratio
from .mc_stats import Z95
from .rate_function import RateSolution
from .rbergomi import PathBatch


@dataclass(frozen=True)
class SkewRatioPoint:
    """ATM implied-to-local skew ratio at one maturity, with its limit target."""

    t: float
    ratio: float
    ci: float
    target: float         # 1 / (H + 3/2)
    defined: bool = True  # False when the local skew is indistinguishable from 0


def skew_ratio_curve(batches: Sequence[PathBatch]) -> list[SkewRatioPoint]:
    """
    Per maturity: implied_skew(k=0) / local_skew(k=0).  The CI treats the two
    estimators as independent although they share a batch, so it is an
    approximate (conservative) band.
    """
    points = []
    for batch in batches:
        target = 1.0 / (batch.params.hurst + 1.5)
        s_bs = implied_skew(batch, 0.0)
        s_loc = local_skew(batch, 0.0)
        if abs(s_loc.value) <= s_loc.ci:
            points.append(SkewRatioPoint(t=batch.maturity, ratio=np.nan,
                                         ci=np.nan, target=target, defined=False))
            continue
        ratio = s_bs.value / s_loc.value
        rel = np.hypot(s_bs.ci / abs(s_bs.value) if s_bs.value else np.inf,
                       s_loc.ci / abs(s_loc.value))
        points.append(SkewRatioPoint(t=batch.maturity, ratio=float(ratio),
                                     ci=float(abs(ratio) * rel), target=target))
    return points


def harmonic_mean(sigma_loc: Callable[[float], float], k: float,
                  n_points: int = 201) -> float:
    """
    Strike-harmonic average k / int_0^k dy / sigma_loc(y), with 1/sigma_loc
    interpolated linearly between evaluation points (trapezoid rule); the
    k = 0 value is the continuous extension sigma_loc(0).
    """
    if k == 0.0:
        return float(sigma_loc(0.0))
    grid = np.linspace(0.0, k, n_points)
    recip = np.array([1.0 / sigma_loc(float(y)) for y in grid])
    if np.any(~np.isfinite(recip)) or np.any(recip <= 0.0):
        raise ValueError("sigma_loc must be positive on the integration range")
    integral = np.trapezoid(recip, grid)
    return float(k / integral)


@dataclass(frozen=True)
class HarmonicRow:
    """sigma_BS(t, k) against the harmonic mean of the local vol."""

    t: float
    k: float
    sigma_bs: float
    harmonic: float
    ratio: float
    ci: float


def harmonic_failure_report(batch: PathBatch, strikes: Sequence[float],
                            n_points: int = 41) -> list[HarmonicRow]:
    """
    Per strike: the ratio sigma_BS(t, k) / H(t, k).  The harmonic mean is
    integrated over local_vol_ratio estimates on a fresh sub-grid per strike;
    its CI combines the per-point bands as if independent (approximate).
    """
    rows = []
    t = batch.maturity
    for k in strikes:
        point = smile_point(batch, k)
        grid = np.linspace(0.0, k, n_points) if k != 0.0 else np.zeros(1)
        loc = [local_vol_ratio(batch, float(y)) for y in grid]
        sig = np.array([p.sigma_loc for p in loc])
        if k == 0.0:
            harmonic = float(sig[0])
            var_h = (loc[0].ci / Z95) ** 2
        else:
            recip = 1.0 / sig
            integral = float(np.trapezoid(recip, grid))
            harmonic = k / integral
            # trapezoid weights propagate each point's standard error
            w = np.gradient(grid)
            w[0] *= 0.5
            w[-1] *= 0.5
            dH = harmonic / integral * w * recip / sig  # dH/dsigma_i
            var_h = float(np.sum((dH * np.array([p.ci for p in loc]) / Z95) ** 2))
        ratio = point.sigma_bs / harmonic
        rel = np.hypot(point.ci / point.sigma_bs, Z95 * np.sqrt(var_h) / harmonic)
        rows.append(HarmonicRow(t=t, k=float(k), sigma_bs=point.sigma_bs,
                                harmonic=harmonic, ratio=float(ratio),
                                ci=float(abs(ratio) * rel)))
    return rows


@dataclass(frozen=True)
class DupirePoint:
    t: float
    k: float
    sigma_loc: float
    ok: bool


def dupire_check(surface: Callable[[float, float], float], t: float, k: float,
                 dt: float | None = None, dk: float = 0.01) -> DupirePoint:
    """
    Local volatility from an implied-volatility surface via the implied-vol
    form of the forward-equation identity, with central finite differences:

        sigma_loc^2 = (sigma + 2 t d_t sigma) /
            (t d_kk sigma - t^2/4 sigma (d_k sigma)^2
             + (1/sigma)(1 - k d_k sigma / sigma)^2).

    Diagnostic only; a non-positive right-hand side flags the point.
    """
    h_t = t / 10.0 if dt is None else dt
    sig = surface(t, k)
    d_t = (surface(t + h_t, k) - surface(t - h_t, k)) / (2.0 * h_t)
    d_k = (surface(t, k + dk) - surface(t, k - dk)) / (2.0 * dk)
    d_kk = (surface(t, k + dk) - 2.0 * sig + surface(t, k - dk)) / dk**2
    numer = sig + 2.0 * t * d_t
    denom = (t * d_kk - 0.25 * t**2 * sig * d_k**2
             + (1.0 - k * d_k / sig) ** 2 / sig)
    ratio = numer / denom
    if not np.isfinite(ratio) or ratio <= 0.0:
        return DupirePoint(t=t, k=k, sigma_loc=np.nan, ok=False)
    return DupirePoint(t=t, k=k, sigma_loc=float(np.sqrt(ratio)), ok=True)


@dataclass(frozen=True)
class LdpPoint:
    t: float
    value: float       # -t^(2H) log P(tail)
    tail_prob: float
    reference: float   # rate(y) from the variational solve


def ldp_diagnostic(batches: Sequence[PathBatch], y: float,
                   reference: float) -> list[LdpPoint]:
    """
    Rescaled tail log-probabilities -t^(2H) log P(X_t >= y t^(1/2-H)) per
    maturity (lower tail for y < 0), against the rate-function value.
    Maturities with an empty tail are dropped with a warning.
    """
    points = []
    for batch in batches:
        hurst = batch.params.hurst
        threshold = y * batch.maturity ** (0.5 - hurst)
        if y >= 0.0:
            count = int(np.sum(batch.x_t >= threshold))
        else:
            count = int(np.sum(batch.x_t <= threshold))
        if count == 0:
            warnings.warn(
                f"empty tail at t={batch.maturity:.4g}, y={y:.4g}; point dropped",
                stacklevel=2)
            continue
        prob = count / batch.n_samples
        value = -batch.maturity ** (2.0 * hurst) * np.log(prob)
        points.append(LdpPoint(t=batch.maturity, value=float(value),
                               tail_prob=prob, reference=reference))
    return points


def extrapolate_local_vol(solutions: Sequence[RateSolution], hurst: float,
                          t: float, k: float) -> float:
    """
    Short-maturity local-vol extrapolation sigma_loc(t, k) ~ sigma_limit(y)
    at y = k / t^(1/2 - H), linearly interpolated on the solved y-grid.
    Points outside the grid raise ExtrapolationRangeError.
    """
    y_grid = np.array([s.y for s in solutions])
    values = np.array([s.sigma_limit for s in solutions])
    order = np.argsort(y_grid)
    y_grid, values = y_grid[order], values[order]
    y = k / t ** (0.5 - hurst)
    if not y_grid[0] <= y <= y_grid[-1]:
        raise ExtrapolationRangeError(
            f"rescaled strike y={y:.6g} outside the solved grid "
            f"[{y_grid[0]:.6g}, {y_grid[-1]:.6g}]")
    return float(np.interp(y, y_grid, values))
