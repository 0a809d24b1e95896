"""Rough Bergomi variance paths, Euler log-price samples, and batch persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fbm
from .params import ModelParams, SimulationGrid


def variance_path(draw: fbm.GaussianDraw, params: ModelParams,
                  grid: SimulationGrid) -> np.ndarray:
    """
    Instantaneous variance at the grid nodes t_0..t_N:

        V_{t_k} = xi0 * exp(eta * What_{t_k} - eta^2/2 * t_k^(2H)),

    with What_0 = 0, so V_{t_0} = xi0.  Strictly positive.
    """
    n = grid.n_steps
    if draw.w_hat.shape != (n,):
        raise ValueError("draw does not match grid")
    t = grid.times
    v = np.empty(n + 1)
    v[0] = params.xi0
    v[1:] = params.xi0 * np.exp(
        params.eta * draw.w_hat - 0.5 * params.eta**2 * t ** (2.0 * params.hurst)
    )
    return v


@dataclass(frozen=True)
class PathSample:
    """Terminal statistics of one path (left-point Euler on the grid)."""

    x_t: float           # terminal log price X_T
    v_t: float           # terminal instantaneous variance V_T
    int_v: float         # int_0^T V_s ds
    int_sqrtv_dw: float  # int_0^T sqrt(V_s) dW_s


def euler_logprice(draw: fbm.GaussianDraw, v_nodes: np.ndarray,
                   params: ModelParams, grid: SimulationGrid) -> PathSample:
    """
    Forward Euler log price

        X_T = -T/(2N) sum_k V_{t_k}
              + sum_k sqrt(V_{t_k}) (rho dW_k + rho_bar dWbar_k),  k = 0..N-1,

    with the pathwise integrals int V dt and int sqrt(V) dW accumulated from
    the same left-point evaluations.
    """
    n = grid.n_steps
    if v_nodes.shape != (n + 1,):
        raise ValueError("v_nodes must hold values at t_0..t_N")
    sqrt_v = np.sqrt(v_nodes[:-1])
    dw = np.diff(draw.w, prepend=0.0)
    int_v = grid.dt * float(np.sum(v_nodes[:-1]))
    int_sqrtv_dw = float(np.sum(sqrt_v * dw))
    int_sqrtv_dwbar = float(np.sum(sqrt_v * draw.w_bar_incr))
    x_t = -0.5 * int_v + params.rho * int_sqrtv_dw + params.rho_bar * int_sqrtv_dwbar
    return PathSample(x_t=x_t, v_t=float(v_nodes[-1]), int_v=int_v,
                      int_sqrtv_dw=int_sqrtv_dw)


@dataclass(frozen=True)
class PathBatch:
    """
    Per-sample terminal statistics for a Monte Carlo batch, stored columnwise.

    All arrays have length n_samples; the recorded (params, grid, seed)
    reproduce the batch exactly.
    """

    x_t: np.ndarray
    v_t: np.ndarray
    int_v: np.ndarray
    int_sqrtv_dw: np.ndarray
    params: ModelParams
    grid: SimulationGrid
    seed: int

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("a batch holds at least one sample")

    @property
    def n_samples(self) -> int:
        return self.x_t.shape[0]

    @property
    def maturity(self) -> float:
        return self.grid.maturity

    def sample(self, i: int) -> PathSample:
        return PathSample(x_t=float(self.x_t[i]), v_t=float(self.v_t[i]),
                          int_v=float(self.int_v[i]),
                          int_sqrtv_dw=float(self.int_sqrtv_dw[i]))

    # -- persistence ---------------------------------------------------------

    def _header(self) -> dict:
        return {
            "xi0": float(self.params.xi0), "eta": float(self.params.eta),
            "rho": float(self.params.rho), "hurst": float(self.params.hurst),
            "maturity": float(self.grid.maturity),
            "n_steps": int(self.grid.n_steps), "seed": int(self.seed),
        }

    def save_npz(self, path) -> None:
        np.savez(path, x_t=self.x_t, v_t=self.v_t, int_v=self.int_v,
                 int_sqrtv_dw=self.int_sqrtv_dw,
                 header=np.frombuffer(
                     json.dumps(self._header()).encode(), dtype=np.uint8))

    @classmethod
    def load_npz(cls, path) -> "PathBatch":
        with np.load(path) as data:
            header = json.loads(bytes(data["header"]).decode())
            return cls._from_arrays(
                data["x_t"], data["v_t"], data["int_v"], data["int_sqrtv_dw"],
                header)

    def write_csv(self, fh) -> None:
        fh.write("# " + json.dumps(self._header()) + "\n")
        fh.write("index,x_T,v_T,int_v,int_sqrtv_dW\n")
        for i in range(self.n_samples):
            fh.write("%d,%.17g,%.17g,%.17g,%.17g\n" % (
                i, self.x_t[i], self.v_t[i], self.int_v[i],
                self.int_sqrtv_dw[i]))

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            self.write_csv(fh)

    @classmethod
    def load_csv(cls, path) -> "PathBatch":
        with open(path) as fh:
            header = json.loads(fh.readline().lstrip("# "))
            fh.readline()  # column names
            table = np.loadtxt(fh, delimiter=",")
        table = np.atleast_2d(table)
        return cls._from_arrays(table[:, 1], table[:, 2], table[:, 3],
                                table[:, 4], header)

    @classmethod
    def _from_arrays(cls, x_t, v_t, int_v, int_sqrtv_dw, header) -> "PathBatch":
        params = ModelParams(xi0=header["xi0"], eta=header["eta"],
                             rho=header["rho"], hurst=header["hurst"])
        grid = SimulationGrid(maturity=header["maturity"],
                              n_steps=int(header["n_steps"]))
        return cls(x_t=np.asarray(x_t, float), v_t=np.asarray(v_t, float),
                   int_v=np.asarray(int_v, float),
                   int_sqrtv_dw=np.asarray(int_sqrtv_dw, float),
                   params=params, grid=grid, seed=int(header["seed"]))


def simulate_batch(params: ModelParams, grid: SimulationGrid, seed: int,
                   n_samples: int, chunk_size: int = 4096) -> PathBatch:
    """
    Simulate ``n_samples`` i.i.d. paths and return their terminal statistics.

    Deterministic given (seed, n_samples, grid, params); samples are assembled
    in index order, so reductions over the batch are reproducible.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    n = grid.n_steps
    factor = fbm.scaled_factor(grid, params.hurst)
    t = grid.times
    drift = 0.5 * params.eta**2 * t ** (2.0 * params.hurst)

    x_t = np.empty(n_samples)
    v_t = np.empty(n_samples)
    int_v = np.empty(n_samples)
    int_sqrtv_dw = np.empty(n_samples)
    for a in range(0, n_samples, chunk_size):
        b = min(a + chunk_size, n_samples)
        w, w_hat, w_bar = fbm.sample_arrays(factor, grid, seed, a, b)
        # V at t_0..t_{N-1} (left points) and at t_N (terminal)
        v_left = np.empty((b - a, n))
        v_left[:, 0] = params.xi0
        v_left[:, 1:] = params.xi0 * np.exp(
            params.eta * w_hat[:, :-1] - drift[:-1])
        v_t[a:b] = params.xi0 * np.exp(params.eta * w_hat[:, -1] - drift[-1])
        sqrt_v = np.sqrt(v_left)
        dw = np.diff(w, axis=1, prepend=0.0)
        int_v[a:b] = grid.dt * np.sum(v_left, axis=1)
        isw = np.sum(sqrt_v * dw, axis=1)
        iswb = np.sum(sqrt_v * w_bar, axis=1)
        int_sqrtv_dw[a:b] = isw
        x_t[a:b] = -0.5 * int_v[a:b] + params.rho * isw + params.rho_bar * iswb
    return PathBatch(x_t=x_t, v_t=v_t, int_v=int_v, int_sqrtv_dw=int_sqrtv_dw,
                     params=params, grid=grid, seed=seed)
