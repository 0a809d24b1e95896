from functools import lru_cache

import pytest

from roughlocalvol.params import ModelParams, SimulationGrid
from roughlocalvol.rbergomi import PathBatch, simulate_batch


@lru_cache(maxsize=16)
def _cached_batch(hurst: float, eta: float, maturity: float, n_steps: int,
                  seed: int, n_samples: int) -> PathBatch:
    params = ModelParams(hurst=hurst, eta=eta)
    grid = SimulationGrid(maturity=maturity, n_steps=n_steps)
    return simulate_batch(params, grid, seed, n_samples)


@pytest.fixture(scope="session")
def make_batch():
    """Factory for small seeded batches, memoized across the session."""

    def factory(hurst=0.1, eta=1.0, maturity=0.1, n_steps=64, seed=1234,
                n_samples=20_000) -> PathBatch:
        return _cached_batch(hurst, eta, maturity, n_steps, seed, n_samples)

    return factory


@pytest.fixture(scope="session")
def rough_batch(make_batch):
    """Paper-style parameters (H = 0.1) at test scale."""
    return make_batch()


@pytest.fixture(scope="session")
def flat_batch(make_batch):
    """eta = 0: constant variance, exact Black-Scholes reduction."""
    return make_batch(eta=0.0, hurst=0.5)
