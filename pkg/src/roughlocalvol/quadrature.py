"""Gauss-Legendre rules, plain and graded toward an endpoint singularity."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def legendre_rule_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def graded_rule_01(order: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss-Legendre rule on [0, 1] with dyadic panels graded
    toward 0: [0, 2^-depth], [2^-depth, 2^-(depth-1)], ..., [1/2, 1].

    Integrates functions whose derivatives blow up algebraically at 0 to
    near machine precision; scale nodes and weights by z_max to integrate
    on [0, z_max].
    """
    x, w = np.polynomial.legendre.leggauss(order)
    hi = 0.5 ** np.arange(depth, -1, -1.0)  # 2^-depth .. 1
    lo = np.concatenate([[0.0], hi[:-1]])
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
