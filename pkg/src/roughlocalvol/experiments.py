"""Orchestration: seeded batch production, caching, figure tables, artifacts."""

from __future__ import annotations

import hashlib
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, asymptotics
from .black_scholes import implied_skew, smile_point
from .config import ExperimentConfig, config_hash
from .errors import PriceDomainError, UnstableEstimateError
from .markov_projection import local_skew, local_vol_kernel, local_vol_ratio
from .params import ModelParams, SimulationGrid
from .rate_function import RateSolution, limiting_smile, skew_constants
from .rbergomi import PathBatch, simulate_batch


def batch_seed(master_seed: int, maturity: float, n_steps: int, hurst: float) -> int:
    """
    128-bit per-batch seed derived from the master seed and the batch
    coordinates, so different maturities and Hurst values use independent
    substreams while reruns stay reproducible.
    """
    entropy = [master_seed, round(maturity * 10**9), n_steps, round(hurst * 10**9)]
    hi, lo = np.random.SeedSequence(entropy=entropy).generate_state(2, np.uint64)
    return (int(hi) << 64) | int(lo)


def _batch_cache_name(params: ModelParams, grid: SimulationGrid, seed: int,
                      n_samples: int) -> str:
    text = (f"{params.xi0!r},{params.eta!r},{params.rho!r},{params.hurst!r},"
            f"{grid.maturity!r},{grid.n_steps},{seed},{n_samples}")
    return "batch_" + hashlib.sha256(text.encode()).hexdigest()[:20] + ".npz"


def get_batch(params: ModelParams, grid: SimulationGrid, master_seed: int,
              n_samples: int, cache_dir: str | Path | None = None) -> PathBatch:
    """Simulate (or load from the on-disk cache) one seeded batch."""
    seed = batch_seed(master_seed, grid.maturity, grid.n_steps, params.hurst)
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / _batch_cache_name(params, grid, seed, n_samples)
        if path.exists():
            return PathBatch.load_npz(path)
    batch = simulate_batch(params, grid, seed, n_samples)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        batch.save_npz(tmp)
        os.replace(tmp, path)
    return batch


def _produce_one(args) -> PathBatch:
    params, grid, master_seed, n_samples, cache_dir = args
    return get_batch(params, grid, master_seed, n_samples, cache_dir)


def produce_batches(config: ExperimentConfig,
                    cache_dir: str | Path | None = None) -> list[PathBatch]:
    """One batch per configured maturity, optionally fanned out to workers.

    Results are ordered by maturity regardless of the worker layout.
    """
    jobs = [(config.params, SimulationGrid(t, config.n_steps), config.seed,
             config.n_samples, cache_dir) for t in config.maturities]
    if config.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(_produce_one, jobs))
    return [_produce_one(job) for job in jobs]


# ---------------------------------------------------------------------------
# figure tables (lists of rows; columns documented in each header)
# ---------------------------------------------------------------------------

def strikes_for(batch: PathBatch, y_grid: Sequence[float]) -> np.ndarray:
    """Map rescaled log-moneyness y to strikes k = y * t^(1/2 - H)."""
    return np.asarray(y_grid) * batch.maturity ** (0.5 - batch.params.hurst)


def smile_table(batches: Sequence[PathBatch], y_grid: Sequence[float]):
    header = ["t", "k", "sigma_bs", "ci"]
    rows = []
    for batch in batches:
        for k in strikes_for(batch, y_grid):
            try:
                point = smile_point(batch, float(k))
            except PriceDomainError:
                warnings.warn(f"smile point skipped at t={batch.maturity}, "
                              f"k={k:.4g}: price outside band", stacklevel=2)
                continue
            rows.append((point.t, point.k, point.sigma_bs, point.ci))
    return header, rows


def skew_term_table(batches: Sequence[PathBatch]):
    header = ["t", "skew_bs", "ci_bs", "skew_loc", "ci_loc"]
    rows = []
    for batch in batches:
        s_bs = implied_skew(batch, 0.0)
        s_loc = local_skew(batch, 0.0)
        rows.append((batch.maturity, s_bs.value, s_bs.ci, s_loc.value, s_loc.ci))
    return header, rows


def skew_ratio_table(batches: Sequence[PathBatch]):
    header = ["t", "ratio", "ci", "target"]
    rows = [(p.t, p.ratio, p.ci, p.target)
            for p in asymptotics.skew_ratio_curve(batches)]
    return header, rows


def local_vol_table(batches: Sequence[PathBatch], y_grid: Sequence[float],
                    bandwidth: float | None = None):
    header = ["t", "k", "sigma_loc_kernel", "sigma_loc_ratio",
              "ci_kernel", "ci_ratio"]
    rows = []
    for batch in batches:
        for k in strikes_for(batch, y_grid):
            kern = local_vol_kernel(batch, float(k), bandwidth)
            ratio = local_vol_ratio(batch, float(k))
            rows.append((batch.maturity, float(k), kern.sigma_loc,
                         ratio.sigma_loc, kern.ci, ratio.ci))
    return header, rows


def rescaled_smile_table(batches: Sequence[PathBatch],
                         y_grid: Sequence[float],
                         solutions: Sequence[RateSolution]):
    """Rescaled local-vol smiles sigma_loc(t, y t^(1/2-H)) per maturity,
    against the limiting curve."""
    header = (["y"] + [f"sigma_loc_t{batch.maturity:g}" for batch in batches]
              + ["sigma_limit"])
    by_y = {sol.y: sol.sigma_limit for sol in solutions}
    rows = []
    for y in y_grid:
        row = [y]
        for batch in batches:
            k = float(strikes_for(batch, [y])[0])
            row.append(local_vol_ratio(batch, k).sigma_loc)
        row.append(by_y[float(y)])
        rows.append(tuple(row))
    return header, rows


def rate_function_table(config: ExperimentConfig):
    solutions = limiting_smile(config.y_grid, config.params, config.ritz)
    n = config.ritz.n_basis
    header = (["y", "lambda", "sigma_limit", "chi"]
              + [f"coeff_{i}" for i in range(1, n + 1)])
    rows = [(s.y, s.rate, s.sigma_limit, s.chi) + tuple(s.coeffs)
            for s in solutions]
    return header, rows, solutions


def constants_text(params: ModelParams) -> str:
    sc = skew_constants(params)
    lines = [
        f"k1_at_one={sc.k1_at_one:.17g}",
        f"k1_mean={sc.k1_mean:.17g}",
        f"ratio={sc.ratio:.17g}",
        f"skew_ratio_limit={1.0 / (params.hurst + 1.5):.17g}",
        f"sigma_slope={sc.sigma_slope:.17g}",
    ]
    return "\n".join(lines) + "\n"


def harmonic_table(batches: Sequence[PathBatch], strikes: Sequence[float]):
    header = ["t", "k", "sigma_bs", "harmonic", "ratio", "ci"]
    rows = []
    for batch in batches:
        for row in asymptotics.harmonic_failure_report(batch, strikes):
            rows.append((row.t, row.k, row.sigma_bs, row.harmonic,
                         row.ratio, row.ci))
    return header, rows


def ldp_table(batches: Sequence[PathBatch], y: float, reference: float):
    header = ["t", "value", "tail_prob", "rate_reference"]
    rows = [(p.t, p.value, p.tail_prob, p.reference)
            for p in asymptotics.ldp_diagnostic(batches, y, reference)]
    return header, rows


def extrapolation_table(solutions: Sequence[RateSolution], hurst: float,
                        maturities: Sequence[float], y_grid: Sequence[float]):
    header = ["t", "k", "sigma_loc_extrapolated"]
    rows = []
    for t in maturities:
        for y in y_grid:
            k = float(y) * t ** (0.5 - hurst)
            value = asymptotics.extrapolate_local_vol(solutions, hurst, t, k)
            rows.append((t, k, value))
    return header, rows


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _format_cell(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


class ArtifactWriter:
    """
    CSV/manifest writer with all-or-nothing semantics: files are staged with a
    .tmp suffix and renamed on commit; abort removes the staged files.
    """

    def __init__(self, out_dir: str | Path, config: ExperimentConfig,
                 subcommand: str):
        self.out_dir = Path(out_dir)
        self.config = config
        self.subcommand = subcommand
        self._staged: list[tuple[Path, Path]] = []
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def _stage(self, name: str, text: str) -> None:
        final = self.out_dir / name
        tmp = self.out_dir / (name + ".tmp")
        tmp.write_text(text)
        self._staged.append((tmp, final))

    def write_table(self, name: str, header: Sequence[str], rows) -> None:
        lines = [",".join(header)]
        lines += [",".join(_format_cell(x) for x in row) for row in rows]
        self._stage(name, "\n".join(lines) + "\n")
        self._stage(name + ".manifest", self._manifest_text())

    def write_text(self, name: str, text: str) -> None:
        self._stage(name, text)
        self._stage(name + ".manifest", self._manifest_text())

    def _manifest_text(self) -> str:
        return (f"config_hash={config_hash(self.config)}\n"
                f"seed={self.config.seed}\n"
                f"version={__version__}\n"
                f"subcommand={self.subcommand}\n")

    def commit(self) -> list[Path]:
        finals = []
        for tmp, final in self._staged:
            os.replace(tmp, final)
            finals.append(final)
        self._staged.clear()
        return finals

    def abort(self) -> None:
        for tmp, _ in self._staged:
            tmp.unlink(missing_ok=True)
        self._staged.clear()
