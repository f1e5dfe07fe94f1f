"""Multi-objective gradient descent toolkit.

Trains models against several objectives at once by combining per-objective
gradients into a common descent vector (min-norm weights on the simplex),
optionally smoothing each objective's gradient with bias-corrected first and
second moments before the weights are computed. Ships Pareto front quality
metrics (hypervolume, coverage, spacing), synthetic benchmark problems, a
small multi-objective recommender, and a config-driven experiment runner
exposed both as a CLI and as an HTTP service.
"""

__version__ = "0.1.0"

from mograd.adamize import MomentState, adamize, new_state, reset
from mograd.combiner import (
    combine,
    is_pareto_stationary,
    solve_min_norm,
    solve_two_objective,
)
from mograd.engine import TrainConfig, TrainHistory, train
from mograd.numerics import RngStream
from mograd.pareto import (
    ParetoArchive,
    coverage,
    dominates,
    hypervolume,
    non_dominated_filter,
    spacing,
)

__all__ = [
    "MomentState",
    "ParetoArchive",
    "RngStream",
    "TrainConfig",
    "TrainHistory",
    "adamize",
    "combine",
    "coverage",
    "dominates",
    "hypervolume",
    "is_pareto_stationary",
    "new_state",
    "non_dominated_filter",
    "reset",
    "solve_min_norm",
    "solve_two_objective",
    "spacing",
    "train",
]
