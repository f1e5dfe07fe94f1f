"""Multi-gradient descent training loop.

Each step computes every objective's mini-batch gradient, rescales each by
that objective's initial loss so differently-scaled objectives become
comparable, optionally smooths each with its own Adam-style moment state,
solves for the min-norm simplex weights, and steps against the weighted
combination. Every objective's first-order directional derivative along
the step is then non-positive, so the loop walks toward Pareto-stationary
points instead of trading objectives off against each other.

Evaluation happens on a configurable cadence (default once per epoch,
before the step): the problem's metrics are archived as a candidate Pareto
point and a history record is kept. After the last epoch the loop measures
stationarity once more on the raw (un-smoothed) normalized gradients of
the reference batch, so the reported terminal ||d|| is noise-free.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from mograd.adamize import MomentState, adamize, new_state, reset
from mograd.combiner import combine, solve_min_norm, solve_two_objective
from mograd.numerics import as_vector, derive_seed
from mograd.pareto import ParetoArchive
from mograd.problems import MultiObjectiveProblem

BASELINE_FLOOR = 1e-12


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    seed: int
    adamize_on: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    lam: float = 1.0
    stationarity_tol: float = 1e-6
    eval_every: int = 0  # 0 = first batch of every epoch
    reset_moments_each_epoch: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        # 0 is allowed so a no-op run can serve as a control
        if self.learning_rate < 0.0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.eval_every < 0:
            raise ValueError(f"eval_every must be >= 0, got {self.eval_every}")
        if self.stationarity_tol <= 0.0:
            raise ValueError(
                f"stationarity_tol must be positive, got {self.stationarity_tol}"
            )


@dataclass
class EvalRecord:
    epoch: int
    batch: int
    losses: tuple[float, ...]
    metrics: tuple[float, ...]
    alphas: tuple[float, ...]
    d_norm: float


@dataclass
class TrainHistory:
    objective_names: list[str]
    baselines: tuple[float, ...]
    records: list[EvalRecord] = field(default_factory=list)
    final_w: np.ndarray | None = None
    final_d_norm: float = float("nan")
    stationary: bool = False


def normalize_gradient(g, baseline: float) -> np.ndarray:
    """g / baseline; refuses baselines at or below the degeneracy floor."""
    if baseline <= BASELINE_FLOOR:
        raise ValueError(
            f"normalization baseline {baseline!r} is not above {BASELINE_FLOOR}"
        )
    return as_vector(g) / baseline


def capture_baseline(problem: MultiObjectiveProblem, w) -> np.ndarray:
    """Per-objective loss at the untrained parameters, floored to stay positive.

    Uses the problem's reference batch so two runs from the same init agree
    exactly. A zero initial loss (already-optimal objective) is floored to
    BASELINE_FLOOR with a warning instead of aborting the run.
    """
    ref = problem.reference_batch()
    baselines = np.empty(problem.n_objectives)
    for i in range(problem.n_objectives):
        value = float(problem.loss(i, w, ref))
        if not np.isfinite(value):
            raise ValueError(
                f"non-finite initial loss {value!r} for objective "
                f"{problem.objective_names[i]!r}"
            )
        if value <= BASELINE_FLOOR:
            warnings.warn(
                f"initial loss for objective {problem.objective_names[i]!r} is "
                f"{value!r}; flooring the normalization baseline to {BASELINE_FLOOR}",
                RuntimeWarning,
                stacklevel=2,
            )
            value = BASELINE_FLOOR
        baselines[i] = value
    return baselines


def update_pareto_archive(archive: ParetoArchive, point, tag) -> None:
    """Insert an evaluation point, evicting anything it dominates."""
    archive.insert(point, payload=tag)


def _solve_weights(grads: list[np.ndarray]) -> np.ndarray:
    if len(grads) == 2:
        return solve_two_objective(grads[0], grads[1])
    return solve_min_norm(grads)


def _check_finite(value: float, what: str, name: str, epoch: int, batch: int) -> None:
    if not np.isfinite(value):
        raise RuntimeError(
            f"non-finite {what} for objective {name!r} at epoch {epoch}, batch {batch}"
        )


def train(
    problem: MultiObjectiveProblem, config: TrainConfig
) -> tuple[ParetoArchive, TrainHistory]:
    names = list(problem.objective_names)
    n = len(names)
    if n < 2:
        raise ValueError("training needs at least two objectives")

    w = as_vector(problem.init_params(derive_seed(config.seed, "init")))
    baselines = capture_baseline(problem, w)
    history = TrainHistory(objective_names=names, baselines=tuple(baselines))
    archive = ParetoArchive(n_objectives=n)

    states: list[MomentState] | None = None
    if config.adamize_on:
        states = [
            new_state(config.beta1, config.beta2, config.epsilon, config.lam)
            for _ in range(n)
        ]

    step = 0
    for epoch in range(config.epochs):
        if states is not None and config.reset_moments_each_epoch:
            for st in states:
                reset(st)
        epoch_seed = derive_seed(config.seed, "epoch", epoch)
        for b_idx, batch in enumerate(problem.batches(epoch_seed, config.batch_size)):
            if config.eval_every == 0:
                evaluate = b_idx == 0
            else:
                evaluate = step % config.eval_every == 0
            if evaluate:
                metrics = as_vector(problem.eval_metrics(w))
                update_pareto_archive(
                    archive, metrics, {"epoch": epoch, "batch": b_idx}
                )

            losses = []
            directions = []
            for i in range(n):
                value = float(problem.loss(i, w, batch))
                _check_finite(value, "loss", names[i], epoch, b_idx)
                g = as_vector(problem.grad(i, w, batch))
                if not np.isfinite(g).all():
                    raise RuntimeError(
                        f"non-finite gradient for objective {names[i]!r} "
                        f"at epoch {epoch}, batch {b_idx}"
                    )
                g = g / baselines[i]
                if states is not None:
                    g = adamize(states[i], g)
                losses.append(value)
                directions.append(g)

            alphas = _solve_weights(directions)
            d = combine(directions, alphas)
            if evaluate:
                history.records.append(
                    EvalRecord(
                        epoch=epoch,
                        batch=b_idx,
                        losses=tuple(losses),
                        metrics=tuple(float(m) for m in metrics),
                        alphas=tuple(float(a) for a in alphas),
                        d_norm=float(np.linalg.norm(d)),
                    )
                )
            w = w - config.learning_rate * d
            step += 1

    # terminal evaluation plus a noise-free stationarity measurement on the
    # reference batch, without moment smoothing
    metrics = as_vector(problem.eval_metrics(w))
    update_pareto_archive(archive, metrics, {"epoch": config.epochs, "batch": 0})
    ref = problem.reference_batch()
    ref_losses = []
    raw = []
    for i in range(n):
        value = float(problem.loss(i, w, ref))
        _check_finite(value, "terminal loss", names[i], config.epochs, 0)
        g = as_vector(problem.grad(i, w, ref)) / baselines[i]
        if not np.isfinite(g).all():
            raise RuntimeError(
                f"non-finite terminal gradient for objective {names[i]!r}"
            )
        ref_losses.append(value)
        raw.append(g)
    alphas = _solve_weights(raw)
    d = combine(raw, alphas)
    d_norm = float(np.linalg.norm(d))
    history.records.append(
        EvalRecord(
            epoch=config.epochs,
            batch=0,
            losses=tuple(ref_losses),
            metrics=tuple(float(m) for m in metrics),
            alphas=tuple(float(a) for a in alphas),
            d_norm=d_norm,
        )
    )
    history.final_w = w
    history.final_d_norm = d_norm
    history.stationary = d_norm <= config.stationarity_tol
    return archive, history
