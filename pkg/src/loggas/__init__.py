"""Numerical laboratory for N-player log-gas games: explicit Nash-system
solutions, singular-drift particle SDEs, beta-ensemble sampling, equilibrium
measures, and Monte Carlo checks of the associated limit theorems."""

__version__ = "0.1.0"

from .core import (
    Config1D,
    Config2D,
    GameParams,
    PairSums,
    inv_sq_circumdiameter,
    pair_sums_1d,
    pair_sums_2d,
    spiral_less,
    spiral_sort,
    wasserstein_1d,
)
from .equilibrium import (
    EquilibriumMeasure1D,
    EquilibriumMeasure2D,
    PotentialSpec,
    circular_law,
    circumcircle_limit,
    limit_singular_stat,
    semicircle,
    solve_one_cut,
    uniform_ball,
)

__all__ = [
    "Config1D",
    "Config2D",
    "GameParams",
    "PairSums",
    "inv_sq_circumdiameter",
    "pair_sums_1d",
    "pair_sums_2d",
    "spiral_less",
    "spiral_sort",
    "wasserstein_1d",
    "EquilibriumMeasure1D",
    "EquilibriumMeasure2D",
    "PotentialSpec",
    "circular_law",
    "circumcircle_limit",
    "limit_singular_stat",
    "semicircle",
    "solve_one_cut",
    "uniform_ball",
    "__version__",
]
