"""Multi-objective problem contract and synthetic benchmarks.

A problem exposes n differentiable objectives over a flat parameter vector
plus an evaluation map into metric space (maximization orientation, one
axis per objective). The training engine only ever talks to this
interface, so optimizer behavior can be validated on problems with known
Pareto sets before touching a real model.

The quadratic benchmark is the workhorse: L_i(w) = ||w - c_i||^2 with an
analytically known Pareto set (for two objectives, the segment between the
centers) and optional seeded Gaussian gradient noise to emulate mini-batch
stochasticity in a controlled way.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from mograd.numerics import RngStream, as_vector, derive_seed, rand_normal


class MultiObjectiveProblem(abc.ABC):
    """Contract between a problem and the descent engine.

    Implementations must make ``loss``/``grad`` deterministic functions of
    (w, batch): any stochasticity (noise, dropout) must be driven by seeds
    carried inside the batch object, never by hidden mutable state.
    """

    dim: int
    objective_names: Sequence[str]

    @property
    def n_objectives(self) -> int:
        return len(self.objective_names)

    @abc.abstractmethod
    def init_params(self, seed: int) -> np.ndarray:
        """Fresh parameter vector; the engine never initializes itself."""

    @abc.abstractmethod
    def batches(self, seed: int, batch_size: int) -> Iterator:
        """One epoch's worth of batch objects, in deterministic order."""

    @abc.abstractmethod
    def loss(self, i: int, w: np.ndarray, batch) -> float:
        ...

    @abc.abstractmethod
    def grad(self, i: int, w: np.ndarray, batch) -> np.ndarray:
        """Exact gradient of loss(i, w, batch) in w for the fixed batch."""

    @abc.abstractmethod
    def eval_metrics(self, w: np.ndarray) -> np.ndarray:
        """Per-objective quality in maximization orientation; deterministic."""

    def reference_batch(self):
        """Batch used for loss baselines and terminal stationarity checks.

        Defaults to None, meaning whatever the problem treats as its full,
        noise-free evaluation input.
        """
        return None


@dataclass(frozen=True)
class QuadraticBatch:
    """Carrier for the per-batch noise seed; there is no data to batch."""

    seed: int | None


class QuadraticProblem(MultiObjectiveProblem):
    """n convex bowls L_i(w) = ||w - c_i||^2 sharing one parameter vector.

    With noise_sigma > 0 each gradient call adds seeded i.i.d. Gaussian
    noise (losses stay exact), emulating stochastic gradients with a known
    noise scale. The reference batch carries no seed, so baselines and
    terminal stationarity are always measured noiselessly.
    """

    def __init__(
        self,
        centers,
        noise_sigma: float = 0.0,
        batches_per_epoch: int = 1,
        init_scale: float = 2.0,
    ):
        c = np.asarray(centers, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 2:
            raise ValueError("centers must be an (n >= 2, D) array")
        if not np.isfinite(c).all():
            raise ValueError("centers contain non-finite entries")
        if noise_sigma < 0.0:
            raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
        if batches_per_epoch < 1:
            raise ValueError("batches_per_epoch must be >= 1")
        self.centers = c
        self.noise_sigma = float(noise_sigma)
        self.batches_per_epoch = int(batches_per_epoch)
        self.init_scale = float(init_scale)
        self.dim = c.shape[1]
        self.objective_names = [f"quad{i + 1}" for i in range(c.shape[0])]

    def init_params(self, seed: int) -> np.ndarray:
        rng = RngStream(seed)
        u = np.array([rng.uniform() for _ in range(self.dim)])
        return (2.0 * u - 1.0) * self.init_scale

    def batches(self, seed: int, batch_size: int) -> Iterator[QuadraticBatch]:
        # batch_size is meaningless here: there is no dataset to slice
        for b in range(self.batches_per_epoch):
            yield QuadraticBatch(seed=derive_seed(seed, "qbatch", b))

    def loss(self, i: int, w: np.ndarray, batch) -> float:
        diff = as_vector(w) - self.centers[i]
        return float(diff @ diff)

    def grad(self, i: int, w: np.ndarray, batch) -> np.ndarray:
        g = 2.0 * (as_vector(w) - self.centers[i])
        seed = getattr(batch, "seed", None)
        if self.noise_sigma > 0.0 and seed is not None:
            noise_rng = RngStream(derive_seed(seed, "noise", i))
            g = g + self.noise_sigma * rand_normal(noise_rng, self.dim)
        return g

    def eval_metrics(self, w: np.ndarray) -> np.ndarray:
        # 1/(1+L) maps losses into (0, 1] so larger is better on every axis
        w = as_vector(w)
        return np.array(
            [1.0 / (1.0 + self.loss(i, w, None)) for i in range(self.n_objectives)]
        )

    def reference_batch(self) -> QuadraticBatch:
        return QuadraticBatch(seed=None)

    def pareto_segment(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of the Pareto set {(1-t) c1 + t c2}; two objectives only."""
        if self.centers.shape[0] != 2:
            raise ValueError("the segment description only exists for n = 2")
        return self.centers[0].copy(), self.centers[1].copy()

    def distance_to_pareto_set(self, w) -> float:
        """Euclidean distance from w to the segment [c1, c2]."""
        c1, c2 = self.pareto_segment()
        w = as_vector(w)
        axis = c2 - c1
        denom = float(axis @ axis)
        if denom == 0.0:
            return float(np.linalg.norm(w - c1))
        t = float((w - c1) @ axis) / denom
        t = min(1.0, max(0.0, t))
        return float(np.linalg.norm(w - (c1 + t * axis)))
