"""Model parameters and simulation grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """
    Rough Bergomi parameters.

    The instantaneous variance is V_t = xi0 * exp(eta * What_t - eta^2/2 * t^(2H))
    where What is a Riemann-Liouville fractional Brownian motion with Hurst
    index ``hurst``, and the log price is driven by rho * W + rho_bar * Wbar.

    Parameters
    ----------
    xi0 : float
        Spot variance, must be positive.
    eta : float
        Volatility of variance, must be non-negative.
    rho : float
        Spot/vol correlation, must lie in the open interval (-1, 1).
    hurst : float
        Hurst index of the fractional driver, in (0, 1/2].
    """

    xi0: float = 0.235**2
    eta: float = 1.0
    rho: float = -0.7
    hurst: float = 0.1

    #: spot is fixed at 1 (zero rates, zero dividends)
    s0: float = 1.0

    def __post_init__(self) -> None:
        if not self.xi0 > 0.0:
            raise ValueError(f"xi0 must be positive, got {self.xi0}")
        if self.eta < 0.0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (-1, 1), got {self.rho}")
        if not 0.0 < self.hurst <= 0.5:
            raise ValueError(f"hurst must be in (0, 1/2], got {self.hurst}")
        if self.s0 != 1.0:
            raise ValueError("spot is fixed at 1")

    @property
    def rho_bar(self) -> float:
        return float(np.sqrt(1.0 - self.rho**2))

    @property
    def sigma0(self) -> float:
        """Spot volatility sqrt(xi0)."""
        return float(np.sqrt(self.xi0))

    def vol_function(self, x):
        """Volatility function sigma(x) = sqrt(xi0) * exp(eta * x / 2)."""
        return np.sqrt(self.xi0) * np.exp(0.5 * self.eta * np.asarray(x, dtype=float))

    def var_function(self, x):
        """Variance function sigma^2(x) = xi0 * exp(eta * x)."""
        return self.xi0 * np.exp(self.eta * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SimulationGrid:
    """
    Uniform time grid t_k = k * maturity / n_steps, k = 1..n_steps.

    The origin t_0 = 0 is excluded from the simulated Gaussian vector (all
    processes vanish there almost surely).
    """

    maturity: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.maturity > 0.0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.maturity / self.n_steps

    @property
    def times(self) -> np.ndarray:
        """Grid nodes t_1..t_N (without the origin)."""
        return self.maturity * np.arange(1, self.n_steps + 1) / self.n_steps

    @property
    def times_with_origin(self) -> np.ndarray:
        """Grid nodes t_0..t_N."""
        return self.maturity * np.arange(0, self.n_steps + 1) / self.n_steps
