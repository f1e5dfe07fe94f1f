"""Common descent vector construction.

Given one gradient per objective, finds simplex weights alpha minimizing
``||sum_i alpha_i g_i||^2`` (the min-norm point in the gradients' convex
hull) and combines the gradients with them. Stepping against the combined
vector decreases every objective to first order; a (near-)zero combined
vector certifies Pareto stationarity.

Two objectives have a closed form. For more, :func:`solve_min_norm` runs
Wolfe's min-norm-point algorithm on the precomputed Gram matrix: grow a
corral of gradients, solve the affine minimizer over the corral exactly,
and line-search back to feasibility when a weight would go negative. It
stops on the duality-gap test ``min_i (M a)_i >= a' M a - tol``. Unlike
plain Frank-Wolfe vertex steps, which zigzag sublinearly whenever the
optimum sits inside a face, this terminates at machine precision, which
the 1e-6 cross-check tolerances require.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from mograd.numerics import as_vector

DEFAULT_MAX_ITER = 1000
# tol acts on the Gram matrix normalized to max entry 1, so the raw-unit
# duality gap is tol * max|G G'|; 1e-12 keeps that below 1e-6 for gradient
# norms up to ~1e3 while staying three decades above float64 roundoff
DEFAULT_TOL = 1e-12


def _as_gradient_matrix(grads) -> np.ndarray:
    """Stack a gradient set into an (n, D) float64 matrix, validating it."""
    if isinstance(grads, np.ndarray) and grads.ndim == 2:
        G = np.asarray(grads, dtype=np.float64)
    else:
        rows = [as_vector(g) for g in grads]
        if not rows:
            raise ValueError("empty gradient set")
        dims = {r.shape[0] for r in rows}
        if len(dims) != 1:
            raise ValueError(f"gradient dimensions differ: {sorted(dims)}")
        G = np.stack(rows)
    if not np.isfinite(G).all():
        raise ValueError("gradient set contains non-finite entries")
    return G


def solve_two_objective(g1, g2) -> np.ndarray:
    """Closed-form min-norm weights (alpha, 1 - alpha) for two gradients.

    alpha = clamp((g2 - g1) . g2 / ||g1 - g2||^2, 0, 1). Identical (or both
    zero) gradients make the denominator vanish; any weighting is then
    optimal and the deterministic tie-break is (0.5, 0.5).
    """
    g1 = as_vector(g1)
    g2 = as_vector(g2)
    if g1.shape != g2.shape:
        raise ValueError(f"length mismatch: {g1.shape[0]} vs {g2.shape[0]}")
    if not (np.isfinite(g1).all() and np.isfinite(g2).all()):
        raise ValueError("gradients contain non-finite entries")
    diff = g1 - g2
    denom = float(diff @ diff)
    if denom == 0.0:
        return np.array([0.5, 0.5])
    alpha = float((g2 - g1) @ g2) / denom
    alpha = min(1.0, max(0.0, alpha))
    return np.array([alpha, 1.0 - alpha])


def _affine_minimizer(M: np.ndarray, corral: list[int]) -> np.ndarray:
    """Weights minimizing the quadratic over the corral's affine hull.

    Solves the bordered KKT system [[M_SS, 1], [1', 0]] via least squares,
    which tolerates affinely dependent (e.g. duplicated) corral members.
    """
    k = len(corral)
    idx = np.array(corral)
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = M[np.ix_(idx, idx)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    return np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]


def solve_min_norm(
    grads, max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Simplex weights minimizing the squared norm of the combination.

    Accepts a sequence of equal-length gradients (or an (n, D) matrix) with
    n >= 2. The Gram matrix is normalized by its largest entry before
    solving, so the returned weights are exactly invariant to rescaling all
    gradients, and ``tol`` acts on that normalized scale.
    """
    G = _as_gradient_matrix(grads)
    n = G.shape[0]
    if n < 2:
        raise ValueError("need at least two objectives")
    M = G @ G.T
    scale = float(np.abs(M).max())
    if scale == 0.0:
        # every gradient is zero; any point of the simplex is optimal
        return np.full(n, 1.0 / n)
    M = M / scale

    alpha = np.zeros(n)
    alpha[int(np.argmin(np.diag(M)))] = 1.0
    corral = [int(np.argmax(alpha))]
    for _ in range(max_iter):
        Ma = M @ alpha
        b = float(alpha @ Ma)
        t = int(np.argmin(Ma))
        if Ma[t] >= b - tol or t in corral:
            break
        corral.append(t)
        for _ in range(2 * n + 4):
            idx = np.array(corral)
            beta = _affine_minimizer(M, corral)
            if (beta >= -1e-12).all():
                alpha = np.zeros(n)
                alpha[idx] = np.clip(beta, 0.0, None)
                alpha /= alpha.sum()
                kept = idx[beta > 1e-12]
                corral = [int(i) for i in kept] or [int(idx[np.argmax(beta)])]
                break
            # move toward beta until the first weight hits zero, drop it
            cur = alpha[idx]
            neg = beta < 0.0
            theta = float(np.min(cur[neg] / (cur[neg] - beta[neg])))
            theta = min(max(theta, 0.0), 1.0)
            merged = (1.0 - theta) * cur + theta * beta
            merged[merged < 1e-14] = 0.0
            alpha = np.zeros(n)
            alpha[idx] = merged
            alpha /= alpha.sum()
            corral = [int(i) for i in idx[merged > 0.0]]
    return alpha


def combine(grads, alphas) -> np.ndarray:
    """Weighted sum of the gradients: sum_i alpha_i g_i."""
    G = _as_gradient_matrix(grads)
    a = as_vector(alphas)
    if a.shape[0] != G.shape[0]:
        raise ValueError(f"{G.shape[0]} gradients but {a.shape[0]} weights")
    return a @ G


def is_pareto_stationary(d, tol: float) -> bool:
    """Whether the combined vector is (numerically) zero: ||d|| <= tol."""
    d = as_vector(d)
    return float(np.linalg.norm(d)) <= tol
