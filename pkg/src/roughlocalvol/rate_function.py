"""Short-maturity rate function by Ritz projection on a Fourier basis.

The rate function

    rate(y) = inf over controls h of
        (y - rho G(h))^2 / (2 (1-rho^2) F(h)) + 1/2 <hdot, hdot>,

with F(h) = int_0^1 sigma(hhat_t)^2 dt and G(h) = int_0^1 sigma(hhat_t)
hdot_t dt, is minimized over truncated Fourier expansions of hdot.  The
minimizer yields the limiting rescaled local volatility sigma(hhat_1^y) and
the limiting implied volatility |y| / sqrt(2 rate(y)).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, QuadratureError
from .params import ModelParams
from .quadrature import graded_rule_01, legendre_rule_01


@dataclass(frozen=True)
class RitzConfig:
    """Basis truncation, quadrature resolution, and optimizer tolerances."""

    n_basis: int = 8
    quad_nodes: int = 256
    tol: float = 1e-8            # gradient infinity-norm at the minimizer
    fd_step: float = 1e-6        # central-difference step for gradients
    max_iter: int = 500

    def __post_init__(self) -> None:
        if self.n_basis < 1:
            raise ValueError("n_basis must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class RateSolution:
    """Minimizer of the rate function at one rescaled log-moneyness y."""

    y: float
    coeffs: np.ndarray     # Fourier coefficients a_1..a_N of hdot
    rate: float            # minimal value (the large-deviations energy)
    h_hat_1: float         # Volterra transform of the minimizer at t = 1
    sigma_limit: float     # sigma(h_hat_1): limiting rescaled local vol
    chi: float             # |y| / sqrt(2 rate): limiting implied vol


def fourier_basis(n: int, t):
    """
    Orthonormal L2(0,1) basis: e_1 = 1, e_{2m} = sqrt(2) cos(2 pi m t),
    e_{2m+1} = sqrt(2) sin(2 pi m t), for n >= 1.
    """
    if n < 1:
        raise ValueError("basis index starts at 1")
    t = np.asarray(t, dtype=float)
    if n == 1:
        return np.ones_like(t) if t.ndim else 1.0
    m = n // 2
    if n % 2 == 0:
        out = np.sqrt(2.0) * np.cos(2.0 * np.pi * m * t)
    else:
        out = np.sqrt(2.0) * np.sin(2.0 * np.pi * m * t)
    return out if t.ndim else float(out)


def basis_matrix(n_basis: int, t: np.ndarray) -> np.ndarray:
    """Matrix B[j, i] = e_{i+1}(t_j)."""
    return np.column_stack([fourier_basis(i, t) for i in range(1, n_basis + 1)])


def _hat_quad_points(hurst: float, order: int = 16, depth: int = 48):
    """
    hhat(t) = int_0^t K(t, s) hdot(s) ds with the substitution
    z = (t - s)^(H + 1/2) becomes

        sqrt(2H)/a * t^a * sum_i w_i hdot(t c_i),   c_i = 1 - u_i^(1/a),

    for the graded unit rule (u_i, w_i).  Returns (c, w).
    """
    a = hurst + 0.5
    u, w = graded_rule_01(order, depth)
    return 1.0 - u ** (1.0 / a), w


def hat_transform(coeffs: Sequence[float], t: float, hurst: float) -> float:
    """
    Volterra transform hhat_t = int_0^t sqrt(2H) (t-s)^(H-1/2) hdot_s ds of
    hdot = sum_n coeffs[n-1] e_n, by singularity-removing graded quadrature.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    a = hurst + 0.5
    values = []
    for order in (16, 24):
        c, w = _hat_quad_points(hurst, order=order)
        hdot = basis_matrix(coeffs.size, t * c) @ coeffs
        values.append(np.sqrt(2.0 * hurst) / a * t**a * float(w @ hdot))
    if abs(values[1] - values[0]) > 1e-10 * (1.0 + abs(values[1])):
        raise QuadratureError(f"hat_transform did not converge at t={t:.6g}")
    return values[1]


class RitzWorkspace:
    """
    Precomputed quadrature tables for one (hurst, config) pair.

    The transform hhat and the derivative hdot are linear in the coefficients,
    so the objective reduces to two cached matrix-vector products per call.
    """

    def __init__(self, hurst: float, config: RitzConfig):
        self.hurst = hurst
        self.config = config
        nodes, weights = legendre_rule_01(config.quad_nodes)
        self.nodes = nodes
        self.weights = weights
        self.basis_at_nodes = basis_matrix(config.n_basis, nodes)
        self.hat_at_nodes = self._hat_matrix(nodes)
        self.hat_at_one = self._hat_matrix(np.array([1.0]))[0]

    def _hat_matrix(self, t: np.ndarray) -> np.ndarray:
        a = self.hurst + 0.5
        out = None
        for order in (16, 24):
            c, w = _hat_quad_points(self.hurst, order=order)
            # rows: outer nodes t_j; basis evaluated at t_j * c_i
            prev = out
            out = np.empty((t.size, self.config.n_basis))
            for i in range(1, self.config.n_basis + 1):
                vals = fourier_basis(i, t[:, None] * c[None, :])
                out[:, i - 1] = vals @ w
            out *= np.sqrt(2.0 * self.hurst) / a * (t**a)[:, None]
        if np.max(np.abs(out - prev)) > 1e-10:
            raise QuadratureError("Volterra transform table did not converge")
        return out

    def objective(self, coeffs: np.ndarray, y: float, params: ModelParams) -> float:
        hdot = self.basis_at_nodes @ coeffs
        hhat = self.hat_at_nodes @ coeffs
        sig = params.vol_function(hhat)
        f_val = float(self.weights @ (sig * sig))
        if f_val <= 0.0:
            raise ValueError("time-averaged variance must be positive")
        g_val = float(self.weights @ (sig * hdot))
        resid = y - params.rho * g_val
        return (resid * resid / (2.0 * (1.0 - params.rho**2) * f_val)
                + 0.5 * float(coeffs @ coeffs))

    def gradient(self, coeffs: np.ndarray, y: float, params: ModelParams) -> np.ndarray:
        grad = np.empty_like(coeffs)
        h = self.config.fd_step
        for i in range(coeffs.size):
            hi = coeffs.copy()
            lo = coeffs.copy()
            hi[i] += h
            lo[i] -= h
            grad[i] = (self.objective(hi, y, params)
                       - self.objective(lo, y, params)) / (2.0 * h)
        return grad


@lru_cache(maxsize=8)
def _workspace(hurst: float, config: RitzConfig) -> RitzWorkspace:
    return RitzWorkspace(hurst, config)


def objective(coeffs: Sequence[float], y: float, params: ModelParams,
              config: RitzConfig | None = None) -> float:
    """Rate-function objective at the given Fourier coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    cfg = config or RitzConfig()
    if coeffs.size != cfg.n_basis:
        cfg = replace(cfg, n_basis=coeffs.size)
    return _workspace(params.hurst, cfg).objective(coeffs, y, params)


def _solution_from(ws: RitzWorkspace, params: ModelParams, y: float,
                   coeffs: np.ndarray, rate: float) -> RateSolution:
    h_hat_1 = float(ws.hat_at_one @ coeffs)
    sigma_limit = float(params.vol_function(h_hat_1))
    chi = params.sigma0 if y == 0.0 else abs(y) / np.sqrt(2.0 * rate)
    return RateSolution(y=y, coeffs=coeffs, rate=max(rate, 0.0),
                        h_hat_1=h_hat_1, sigma_limit=sigma_limit, chi=float(chi))


def minimize_rate(y: float, params: ModelParams,
                  config: RitzConfig | None = None,
                  warm_start: np.ndarray | None = None) -> RateSolution:
    """
    Quasi-Newton minimization over the truncated coefficients, from the zero
    start and a tilted restart (plus an optional warm start); the best result
    is kept.  Non-convergence past the iteration cap raises ConvergenceError
    carrying the last iterate.
    """
    cfg = config or RitzConfig()
    ws = _workspace(params.hurst, cfg)
    starts = [np.zeros(cfg.n_basis)]
    tilted = np.zeros(cfg.n_basis)
    tilted[0] = y * params.rho / params.sigma0
    starts.append(tilted)
    if warm_start is not None and warm_start.size == cfg.n_basis:
        starts.insert(0, np.asarray(warm_start, dtype=float))

    best = None
    last = None
    for x0 in starts:
        res = optimize.minimize(
            ws.objective, x0, args=(y, params), jac=ws.gradient,
            method="BFGS",
            options={"gtol": cfg.tol, "maxiter": cfg.max_iter, "norm": np.inf},
        )
        last = res.x
        gnorm = float(np.max(np.abs(ws.gradient(res.x, y, params))))
        if gnorm <= cfg.tol and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise ConvergenceError(
            f"rate minimization did not reach gradient tolerance {cfg.tol:g} "
            f"at y={y:.6g}", last_iterate=last)
    return _solution_from(ws, params, y, best.x, float(best.fun))


def limiting_smile(y_grid: Sequence[float], params: ModelParams,
                   config: RitzConfig | None = None) -> list[RateSolution]:
    """
    Rate solutions over a grid of y, adjacent minimizers warm-starting each
    other outward from y = 0 on each side (guards branch hopping).  Results
    are returned in the input order.
    """
    cfg = config or RitzConfig()
    y_arr = np.asarray(list(y_grid), dtype=float)
    # march outward from 0 on each side so each solve warm-starts the next
    positive = np.unique(y_arr[y_arr >= 0.0])
    negative = np.unique(y_arr[y_arr < 0.0])[::-1]
    solutions: dict[float, RateSolution] = {}
    for side in (positive, negative):
        warm = None
        for y in side:
            sol = minimize_rate(float(y), params, cfg, warm_start=warm)
            solutions[float(y)] = sol
            warm = sol.coeffs
    return [solutions[float(y)] for y in y_arr]


@dataclass(frozen=True)
class SkewConstants:
    """Small-y skew constants of the limiting smiles."""

    k1_at_one: float     # K1(1), K1(t) = int_0^t K(t, s) ds
    k1_mean: float       # int_0^1 K1(t) dt
    ratio: float         # K1(1) / int_0^1 K1(t) dt  (equals H + 3/2)
    sigma_slope: float   # d sigma(hhat_1^y)/dy at y = 0: (eta/2) rho K1(1)


def skew_constants(params: ModelParams, config: RitzConfig | None = None) -> SkewConstants:
    """Evaluate K1(1) and its time average by quadrature and derive the ratios."""
    ones = np.array([1.0])
    k1_at_one = hat_transform(ones, 1.0, params.hurst)
    # K1(t) ~ t^(H+1/2) has an endpoint derivative singularity at 0: grade there
    nodes, weights = graded_rule_01(16, 48)
    k1_vals = np.array([hat_transform(ones, float(t), params.hurst) for t in nodes])
    k1_mean = float(weights @ k1_vals)
    return SkewConstants(
        k1_at_one=k1_at_one,
        k1_mean=k1_mean,
        ratio=k1_at_one / k1_mean,
        sigma_slope=0.5 * params.eta * params.rho * k1_at_one,
    )
