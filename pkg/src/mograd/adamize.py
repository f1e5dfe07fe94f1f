"""Adam-style smoothing of per-objective gradients.

Keeps the usual exponential moving averages of a gradient and its square,
with bias correction, but instead of feeding an optimizer step it returns
a blend of the raw gradient and the Adam direction:

    (1 - lam) * g + lam * m_hat / (sqrt(v_hat) + epsilon)

lam = 0 passes the gradient through untouched (moments still update, so the
blend can be changed mid-run), lam = 1 is the pure Adam direction. Each
objective gets its own :class:`MomentState`; state persists across epochs
unless the caller resets it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mograd.numerics import as_vector

DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPSILON = 1e-8
DEFAULT_LAMBDA = 1.0


@dataclass
class MomentState:
    """First/second moment accumulators and hyperparameters for one objective."""

    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    lam: float = DEFAULT_LAMBDA
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)


def new_state(
    beta1: float = DEFAULT_BETA1,
    beta2: float = DEFAULT_BETA2,
    epsilon: float = DEFAULT_EPSILON,
    lam: float = DEFAULT_LAMBDA,
) -> MomentState:
    """Validated fresh state with zeroed moments (allocated on first use)."""
    if not 0.0 <= beta1 < 1.0:
        raise ValueError(f"beta1 must be in [0, 1), got {beta1}")
    if not 0.0 <= beta2 < 1.0:
        raise ValueError(f"beta2 must be in [0, 1), got {beta2}")
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    return MomentState(beta1=beta1, beta2=beta2, epsilon=epsilon, lam=lam)


def reset(state: MomentState) -> None:
    """Zero the moments and the step counter in place."""
    state.t = 0
    state.m = None
    state.v = None


def adamize(state: MomentState, g) -> np.ndarray:
    """Advance the moments with g and return the blended direction.

    Mutates ``state``. At t = 1 the bias correction makes m_hat == g and
    v_hat == g * g exactly.
    """
    g = as_vector(g)
    if not np.isfinite(g).all():
        raise ValueError("gradient contains non-finite entries")
    if state.m is None:
        state.m = np.zeros_like(g)
        state.v = np.zeros_like(g)
    elif state.m.shape != g.shape:
        raise ValueError(
            f"gradient length changed: state has {state.m.shape[0]}, got {g.shape[0]}"
        )
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    if state.lam == 0.0:
        # moments were advanced above; the output must be bit-identical to g
        return g.copy()
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    smoothed = m_hat / (np.sqrt(v_hat) + state.epsilon)
    if state.lam == 1.0:
        return smoothed
    return (1.0 - state.lam) * g + state.lam * smoothed
