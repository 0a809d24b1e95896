"""Exact joint Gaussian law of (W, What) on a grid: assembly, factorization, sampling.

What_t = int_0^t sqrt(2H) (t-s)^(H-1/2) dW_s is a Riemann-Liouville fractional
Brownian motion.  The joint covariance of (W_{t_k}, What_{t_k}) at the grid
nodes is assembled exactly (singular integrals by graded quadrature), factored
once, and sample batches are drawn from counter-based per-sample substreams so
that every draw is a pure function of (seed, sample index).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy.special import ndtri

from .errors import FactorizationError, QuadratureError
from .params import SimulationGrid
from .quadrature import graded_rule_01

_KEY_MASK = (1 << 128) - 1
#: Philox key salt separating the Wbar substream from the (W, What) substream
_WBAR_SALT = 0x9E3779B97F4A7C15F39CC0605CEDC832
#: samples are processed in fixed aligned blocks so that every draw is
#: bit-reproducible regardless of how a batch is chunked across workers
_BLOCK = 4096


def kernel_eval(t, s, hurst):
    """
    Volterra kernel K(t, s) = sqrt(2H) (t - s)^(H - 1/2) for t > s, else 0.

    Accepts scalars or broadcastable arrays.
    """
    t_arr = np.asarray(t, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    diff = np.subtract(t_arr, s_arr)
    out = np.zeros_like(diff, dtype=float)
    mask = diff > 0.0
    np.place(out, mask, np.sqrt(2.0 * hurst) * np.extract(mask, diff) ** (hurst - 0.5))
    if np.isscalar(t) and np.isscalar(s):
        return float(out)
    return out


@dataclass(frozen=True)
class JointCovariance:
    """Covariance of (W_{t_1..t_N}, What_{t_1..t_N}), W rows/cols first."""

    matrix: np.ndarray
    hurst: float
    grid: SimulationGrid

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0] // 2


def _hat_offdiag(s: np.ndarray, t: np.ndarray, hurst: float,
                 order: int, depth: int) -> np.ndarray:
    """
    Cov(What_s, What_t) = 2H int_0^s (t-u)^(H-1/2) (s-u)^(H-1/2) du  for s < t.

    The substitution z = (s-u)^(H+1/2) removes the endpoint singularity:

        I = 2H/a * int_0^{s^a} (t - s + z^(1/a))^(H-1/2) dz,   a = H + 1/2,

    evaluated with a composite Gauss-Legendre rule graded toward z = 0.
    """
    a = hurst + 0.5
    u, w = graded_rule_01(order, depth)
    z_max = s**a
    z = z_max[:, None] * u[None, :]
    g = (t[:, None] - s[:, None] + z ** (1.0 / a)) ** (hurst - 0.5)
    return (2.0 * hurst / a) * z_max * (g @ w)


def _hat_block(times: np.ndarray, hurst: float, tol: float) -> np.ndarray:
    n = times.size
    block = np.empty((n, n))
    block[np.diag_indices(n)] = times ** (2.0 * hurst)
    iu, ju = np.triu_indices(n, k=1)
    if iu.size == 0:
        return block
    s, t = times[iu], times[ju]

    vals = np.empty(iu.size)
    err = np.empty(iu.size)
    for lo in range(0, iu.size, 4096):
        hi = min(lo + 4096, iu.size)
        coarse = _hat_offdiag(s[lo:hi], t[lo:hi], hurst, order=16, depth=48)
        fine = _hat_offdiag(s[lo:hi], t[lo:hi], hurst, order=24, depth=48)
        vals[lo:hi] = fine
        err[lo:hi] = np.abs(fine - coarse)

    bad = np.flatnonzero(err > tol)
    if bad.size:
        refined = _hat_offdiag(s[bad], t[bad], hurst, order=48, depth=96)
        recheck = _hat_offdiag(s[bad], t[bad], hurst, order=64, depth=96)
        still = np.abs(recheck - refined) > tol
        if np.any(still):
            k = bad[np.argmax(np.abs(recheck - refined))]
            raise QuadratureError(
                f"covariance entry (What_{iu[k] + 1}, What_{ju[k] + 1}) did not "
                f"converge to {tol:g} (s={s[k]:.6g}, t={t[k]:.6g})"
            )
        vals[bad] = recheck

    block[iu, ju] = vals
    block[ju, iu] = vals
    return block


def build_covariance(grid: SimulationGrid, hurst: float,
                     tol: float = 1e-12) -> JointCovariance:
    """
    Assemble the exactly symmetric 2N x 2N covariance matrix of the Gaussian
    vector (W_{t_1..t_N}, What_{t_1..t_N}).

    W block: min(t_i, t_j).  Cross block: sqrt(2H)/(H+1/2) *
    (t_j^(H+1/2) - (t_j - min)^(H+1/2)).  What block: graded quadrature to
    absolute tolerance ``tol`` (diagonal t^(2H) is analytic).
    """
    if not 0.0 < hurst <= 0.5:
        raise ValueError(f"hurst must be in (0, 1/2], got {hurst}")
    times = grid.times
    a = hurst + 0.5
    tmin = np.minimum.outer(times, times)
    w_block = tmin
    # cross[i, j] = Cov(W_{t_i}, What_{t_j})
    cross = np.sqrt(2.0 * hurst) / a * (
        times[None, :] ** a - (times[None, :] - tmin) ** a
    )
    hat = _hat_block(times, hurst, tol)
    matrix = np.block([[w_block, cross], [cross.T, hat]])
    return JointCovariance(matrix=matrix, hurst=hurst, grid=grid)


def _semidefinite_cholesky(a: np.ndarray, delta: float):
    """
    Left-looking Cholesky tolerating exact semidefiniteness.

    Pivots in (-delta, delta] are treated as zero provided the remaining
    column is already represented (residual below delta); the corresponding
    factor column is zeroed, which keeps duplicated rows of the input mapped
    to bitwise-identical factor rows.  Returns (L, worst_pivot); L is None on
    failure.
    """
    n = a.shape[0]
    low = np.zeros_like(a)
    worst = np.inf
    for j in range(n):
        row = low[j, :j]
        d = a[j, j] - row @ row
        worst = min(worst, d)
        resid = a[j + 1:, j] - low[j + 1:, :j] @ row
        if d > delta:
            low[j, j] = np.sqrt(d)
            low[j + 1:, j] = resid / low[j, j]
        elif d > -delta:
            if resid.size and np.max(np.abs(resid)) > delta:
                return None, worst
            # zero pivot with consistent column: factor column stays zero
        else:
            return None, worst
    return low, worst


def factorize(cov, tol_factor: float = 1e-12, escalations: int = 3) -> np.ndarray:
    """
    Lower-triangular L with L @ L.T reproducing the covariance entrywise.

    Plain Cholesky is attempted first; a singular (but PSD) matrix falls back
    to a zero-pivot-tolerant factorization with tolerance tol_factor * max
    diagonal, escalated tenfold up to ``escalations`` times.  Indefiniteness
    beyond the budget raises FactorizationError with the most negative pivot.
    """
    matrix = cov.matrix if isinstance(cov, JointCovariance) else np.asarray(cov, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if not np.array_equal(matrix, matrix.T):
        raise ValueError("covariance must be exactly symmetric")
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.max(np.abs(np.diag(matrix)))) or 1.0
    delta = tol_factor * scale
    worst = np.inf
    for _ in range(escalations):
        low, worst = _semidefinite_cholesky(matrix, delta)
        if low is not None:
            return low
        delta *= 10.0
    raise FactorizationError(
        f"matrix is not positive semidefinite within the tolerance budget; "
        f"most negative pivot {worst:.6e}"
    )


@lru_cache(maxsize=16)
def _unit_factor(n_steps: int, hurst: float) -> np.ndarray:
    """Factor of the joint covariance on the unit-maturity grid (cached)."""
    grid = SimulationGrid(maturity=1.0, n_steps=n_steps)
    low = factorize(build_covariance(grid, hurst))
    low.setflags(write=False)
    return low


def scaled_factor(grid: SimulationGrid, hurst: float) -> np.ndarray:
    """
    Factor for an arbitrary maturity from the cached unit-grid factor.

    Self-similarity: W scales like sqrt(T) and What like T^H, so the factor
    for maturity T is diag(sqrt(T) I, T^H I) times the unit factor.
    """
    low = _unit_factor(grid.n_steps, hurst)
    n = grid.n_steps
    scale = np.concatenate([
        np.full(n, np.sqrt(grid.maturity)),
        np.full(n, grid.maturity**hurst),
    ])
    return scale[:, None] * low


@dataclass(frozen=True)
class GaussianDraw:
    """One joint draw: W and What at t_1..t_N plus independent Wbar increments."""

    w: np.ndarray
    w_hat: np.ndarray
    w_bar_incr: np.ndarray


def _philox_normals(key: int, start: int, count: int, per_sample: int) -> np.ndarray:
    """
    Standard normals for samples [start, start+count), ``per_sample`` each.

    Sample m occupies a dedicated counter window of the Philox stream, so the
    output rows depend only on (key, sample index).
    """
    alloc = -(-per_sample // 4) * 4  # whole 4-word counter blocks per sample
    bg = np.random.Philox(key=key, counter=start * (alloc // 4))
    raw = bg.random_raw(alloc * count).reshape(count, alloc)[:, :per_sample]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def _check_seed(seed: int) -> int:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return seed & _KEY_MASK


def sample_arrays(factor: np.ndarray, grid: SimulationGrid, seed: int,
                  start: int, stop: int):
    """
    Draws for sample indices [start, stop) as arrays (w, w_hat, w_bar_incr),
    each of shape (stop - start, N).

    Samples are computed in fixed aligned blocks so the result for a given
    index is identical under any chunking of the index range.
    """
    n = grid.n_steps
    if factor.shape != (2 * n, 2 * n):
        raise ValueError(
            f"factor shape {factor.shape} does not match grid with {n} steps"
        )
    key = _check_seed(seed)
    m = stop - start
    w = np.empty((m, n))
    w_hat = np.empty((m, n))
    w_bar = np.empty((m, n))
    lo = (start // _BLOCK) * _BLOCK
    while lo < stop:
        z = _philox_normals(key, lo, _BLOCK, 2 * n)
        joint = z @ factor.T
        zbar = _philox_normals(key ^ _WBAR_SALT, lo, _BLOCK, n)
        a = max(lo, start)
        b = min(lo + _BLOCK, stop)
        w[a - start:b - start] = joint[a - lo:b - lo, :n]
        w_hat[a - start:b - start] = joint[a - lo:b - lo, n:]
        w_bar[a - start:b - start] = np.sqrt(grid.dt) * zbar[a - lo:b - lo]
        lo += _BLOCK
    return w, w_hat, w_bar


def sample_batch(factor: np.ndarray, grid: SimulationGrid, seed: int,
                 n_samples: int, chunk_size: int = _BLOCK) -> Iterator[GaussianDraw]:
    """
    Yield ``n_samples`` GaussianDraw records, deterministically in
    (seed, sample index).  n_samples = 0 yields nothing.
    """
    for a in range(0, n_samples, chunk_size):
        b = min(a + chunk_size, n_samples)
        w, w_hat, w_bar = sample_arrays(factor, grid, seed, a, b)
        for i in range(b - a):
            yield GaussianDraw(w=w[i], w_hat=w_hat[i], w_bar_incr=w_bar[i])


def dump_covariance_csv(cov: JointCovariance, path) -> None:
    """Row-major CSV dump with 17 significant digits (debug aid)."""
    with open(path, "w") as fh:
        for row in cov.matrix:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")
