"""Delta-method confidence intervals for smooth functions of sample means."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

#: two-sided 95% normal quantile
Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    """Point estimate with 95% confidence half-width."""

    value: float
    ci: float

    def agrees_with(self, other: "Estimate") -> bool:
        """Whether the two values differ by less than the combined CI."""
        return abs(self.value - other.value) <= np.hypot(self.ci, other.ci)


def mean_with_se(samples: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error."""
    m = samples.shape[0]
    return float(np.mean(samples)), float(np.std(samples, ddof=1) / np.sqrt(m))


def delta_method(samples: Sequence[np.ndarray],
                 func: Callable[[np.ndarray], float]) -> Estimate:
    """
    Estimate func(E[samples]) with a first-order delta-method CI.

    ``samples`` is a sequence of d equal-length per-sample arrays; ``func``
    maps the d-vector of means to the quantity of interest.  The gradient is
    taken by central differences, so ``func`` only needs to be smooth near the
    estimated means.
    """
    matrix = np.vstack(samples)
    m = matrix.shape[1]
    means = matrix.mean(axis=1)
    if m < 2:
        return Estimate(value=float(func(means)), ci=np.inf)
    cov_means = np.atleast_2d(np.cov(matrix, ddof=1)) / m
    value = func(means)
    grad = np.zeros(means.shape[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        for i in range(means.shape[0]):
            # relative step keeps positivity constraints (ratios, square roots)
            h = 1e-6 * abs(means[i]) if means[i] != 0.0 else 1e-12
            hi = means.copy()
            lo = means.copy()
            hi[i] += h
            lo[i] -= h
            diff = (func(hi) - func(lo)) / (2.0 * h)
            if np.isfinite(diff):
                grad[i] = diff
    var = float(grad @ cov_means @ grad)
    return Estimate(value=float(value), ci=Z95 * np.sqrt(max(var, 0.0)))
