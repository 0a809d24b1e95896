"""Monte Carlo and variational laboratory for local volatility under rough volatility.

Simulates the rough Bergomi model exactly on a grid, estimates implied and
local (Markovian-projection) volatilities and their skews, solves the
short-maturity large-deviations rate-function minimization, and assembles the
resulting asymptotic diagnostics (skew power laws, the 1/(H+3/2) skew-ratio
rule, harmonic-mean comparisons).
"""

__version__ = "0.1.0"

from .params import ModelParams, SimulationGrid

__all__ = ["ModelParams", "SimulationGrid", "__version__"]
