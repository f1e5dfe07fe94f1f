"""Multinomial autoencoder recommender with manual backpropagation.

The model maps a user's (L2-normalized) binary interaction vector through
tanh encoder layers to a latent code, decodes back to softmax
probabilities over the catalog, and is trained on weighted negative
log-likelihood: loss = mean over users of

    -sum_j (weight_j * x_j) * log p(j | z)  +  beta * KL(q(z|x) || N(0, I))

where x is the raw binary vector. Each training objective is just a
different item weight vector: all-ones for relevance (which also carries
the KL term), prices for revenue, transformed recency for recency. The
gradient is computed by hand through the fixed architecture; the softmax
and the weighted NLL fuse to d(logits) = (sum_j c_j) * p - c per user with
c = weight * x.

All stochasticity (input dropout, reparameterized latent sampling) is
driven by a seed carried in the batch, so loss and gradient for the same
batch see identical draws, which keeps the gradient exact for the sampled
loss and finite-difference checkable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mograd.numerics import (
    RngStream,
    as_vector,
    derive_seed,
    minmax_unit,
    rand_normal,
    rand_uniform,
    softmax,
)
from mograd.problems import MultiObjectiveProblem

LOG_FLOOR = 1e-12

OBJECTIVES = ("relevance", "revenue", "recency")


def recency_transform(rho):
    """Perceived recency of a [0,1] recency score.

    1 on [0.8, 1], exponential falloff 0.3^((0.8 - rho) * 10/3) below;
    continuous at 0.8 and equal to 0.3 at rho = 0.5. Accepts scalars or
    arrays.
    """
    r = np.asarray(rho, dtype=np.float64)
    if (r < 0.0).any() or (r > 1.0).any():
        raise ValueError("recency scores must lie in [0, 1]")
    out = np.where(r >= 0.8, 1.0, 0.3 ** ((0.8 - r) * (10.0 / 3.0)))
    if out.ndim == 0:
        return float(out)
    return out


def recall_at_k(ranked_items: Sequence[int], held_out, k: int) -> float:
    """Hits among the top k, normalized by min(k, |held-out|)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    held = set(held_out)
    if not held:
        raise ValueError("recall is undefined for an empty held-out set")
    hits = sum(1 for item in list(ranked_items)[:k] if item in held)
    return hits / min(k, len(held))


def mean_weight_at_k(ranked_items: Sequence[int], weights, k: int) -> float:
    """Mean item weight over the top k recommended items."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    w = as_vector(weights)
    top = list(ranked_items)[:k]
    if not top:
        raise ValueError("empty ranking")
    return float(np.mean([w[i] for i in top]))


def avg_price_at_k(ranked_items, prices, k: int) -> float:
    """Mean top-k price, min-max normalized by the global price range."""
    return mean_weight_at_k(ranked_items, minmax_unit(prices), k)


def avg_recency_at_k(ranked_items, recency_weights, k: int) -> float:
    """Mean top-k recency weight, min-max normalized by its global range."""
    return mean_weight_at_k(ranked_items, minmax_unit(recency_weights), k)


@dataclass(frozen=True)
class Architecture:
    n_items: int
    hidden: tuple[int, ...] = (64,)
    latent: int = 16
    variational: bool = False
    dropout: float = 0.0

    def __post_init__(self):
        if self.n_items < 1:
            raise ValueError("n_items must be >= 1")
        if self.latent < 1:
            raise ValueError("latent size must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden sizes must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


class Autoencoder:
    """Dense autoencoder over a flat parameter vector.

    The parameter layout is fixed at construction (encoder layers, latent
    head(s), decoder layers); ``init_params`` draws weights in that order,
    so a seed fully determines the model.
    """

    def __init__(self, arch: Architecture):
        self.arch = arch
        layout: list[tuple[str, tuple[int, ...]]] = []
        enc_chain = [arch.n_items, *arch.hidden]
        for idx in range(len(enc_chain) - 1):
            layout.append((f"enc{idx}_W", (enc_chain[idx], enc_chain[idx + 1])))
            layout.append((f"enc{idx}_b", (enc_chain[idx + 1],)))
        layout.append(("mu_W", (enc_chain[-1], arch.latent)))
        layout.append(("mu_b", (arch.latent,)))
        if arch.variational:
            layout.append(("lv_W", (enc_chain[-1], arch.latent)))
            layout.append(("lv_b", (arch.latent,)))
        dec_chain = [arch.latent, *reversed(arch.hidden), arch.n_items]
        for idx in range(len(dec_chain) - 1):
            layout.append((f"dec{idx}_W", (dec_chain[idx], dec_chain[idx + 1])))
            layout.append((f"dec{idx}_b", (dec_chain[idx + 1],)))
        self._layout = layout
        self._slices: dict[str, tuple[slice, tuple[int, ...]]] = {}
        offset = 0
        for name, shape in layout:
            size = int(np.prod(shape))
            self._slices[name] = (slice(offset, offset + size), shape)
            offset += size
        self.n_params = offset
        self._n_dec = len(dec_chain) - 1
        self._n_enc = len(enc_chain) - 1

    def init_params(self, seed: int) -> np.ndarray:
        rng = RngStream(seed)
        w = np.zeros(self.n_params)
        for name, shape in self._layout:
            if name.endswith("_b"):
                continue  # biases start at zero, no draws
            sl, _ = self._slices[name]
            fan_in = shape[0]
            w[sl] = rand_normal(rng, int(np.prod(shape))) / np.sqrt(fan_in)
        return w

    def unpack(self, w: np.ndarray) -> dict[str, np.ndarray]:
        w = as_vector(w)
        if w.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {w.shape[0]}")
        return {
            name: w[sl].reshape(shape) for name, (sl, shape) in self._slices.items()
        }

    def _prepare_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.arch.n_items:
            raise ValueError(
                f"expected a (batch, {self.arch.n_items}) interaction matrix, "
                f"got shape {X.shape}"
            )
        return X

    def _forward(self, w, X, seed, train):
        """Full forward pass; returns everything backward needs."""
        P = self.unpack(w)
        X = self._prepare_input(X)
        B = X.shape[0]
        norms = np.sqrt((X * X).sum(axis=1, keepdims=True))
        xn = X / np.maximum(norms, 1e-12)

        stochastic = train and (self.arch.dropout > 0.0 or self.arch.variational)
        rng = None
        if stochastic:
            if seed is None:
                raise ValueError("stochastic forward pass needs a batch seed")
            rng = RngStream(derive_seed(seed, "fwd"))

        if train and self.arch.dropout > 0.0:
            u = rand_uniform(rng, B * self.arch.n_items).reshape(B, -1)
            mask = (u >= self.arch.dropout) / (1.0 - self.arch.dropout)
            xd = xn * mask
        else:
            xd = xn

        hs = [xd]
        for idx in range(self._n_enc):
            a = hs[-1] @ P[f"enc{idx}_W"] + P[f"enc{idx}_b"]
            hs.append(np.tanh(a))
        mu = hs[-1] @ P["mu_W"] + P["mu_b"]

        lv = xi = None
        kl = np.zeros(B)
        if self.arch.variational:
            lv = hs[-1] @ P["lv_W"] + P["lv_b"]
            kl = 0.5 * (mu * mu + np.exp(lv) - 1.0 - lv).sum(axis=1)
            if train:
                xi = rand_normal(rng, B * self.arch.latent).reshape(B, -1)
                z = mu + np.exp(0.5 * lv) * xi
            else:
                z = mu
        else:
            z = mu

        ds = [z]
        for idx in range(self._n_dec - 1):
            c = ds[-1] @ P[f"dec{idx}_W"] + P[f"dec{idx}_b"]
            ds.append(np.tanh(c))
        last = self._n_dec - 1
        logits = ds[-1] @ P[f"dec{last}_W"] + P[f"dec{last}_b"]
        probs = softmax(logits)
        return P, X, hs, mu, lv, xi, kl, ds, probs

    def probabilities(self, w, X, seed=None, train: bool = False):
        """Item probabilities and per-user KL terms."""
        *_, kl, _, probs = self._forward(w, X, seed, train)
        return probs, kl

    def logits_scores(self, w, X) -> np.ndarray:
        """Deterministic ranking scores (monotone in the probabilities)."""
        P = self.unpack(w)
        X = self._prepare_input(X)
        norms = np.sqrt((X * X).sum(axis=1, keepdims=True))
        h = X / np.maximum(norms, 1e-12)
        for idx in range(self._n_enc):
            h = np.tanh(h @ P[f"enc{idx}_W"] + P[f"enc{idx}_b"])
        d = h @ P["mu_W"] + P["mu_b"]
        for idx in range(self._n_dec - 1):
            d = np.tanh(d @ P[f"dec{idx}_W"] + P[f"dec{idx}_b"])
        last = self._n_dec - 1
        return d @ P[f"dec{last}_W"] + P[f"dec{last}_b"]

    def _weight_vector(self, item_weight) -> np.ndarray:
        iw = as_vector(item_weight)
        if iw.shape[0] != self.arch.n_items:
            raise ValueError(
                f"item weights have length {iw.shape[0]}, catalog has "
                f"{self.arch.n_items}"
            )
        if (iw < 0.0).any() or not np.isfinite(iw).all():
            raise ValueError("item weights must be finite and >= 0")
        return iw

    def loss(self, w, X, item_weight, beta: float = 0.0, seed=None, train=False):
        iw = self._weight_vector(item_weight)
        *_, kl, _, probs = self._forward(w, X, seed, train)
        X = self._prepare_input(X)
        c = iw * X
        nll = -(c * np.log(np.maximum(probs, LOG_FLOOR))).sum(axis=1)
        return float(np.mean(nll + beta * kl))

    def grad(self, w, X, item_weight, beta: float = 0.0, seed=None, train=False):
        """Exact gradient of :meth:`loss` for the same batch and seed."""
        iw = self._weight_vector(item_weight)
        P, X, hs, mu, lv, xi, kl, ds, probs = self._forward(w, X, seed, train)
        B = X.shape[0]
        g = np.zeros(self.n_params)
        out = {name: g[sl].reshape(shape) for name, (sl, shape) in self._slices.items()}

        c = iw * X
        s = c.sum(axis=1, keepdims=True)
        # the log floor never binds at these scales, so treat it as inactive
        dlogits = (s * probs - c) / B

        last = self._n_dec - 1
        out[f"dec{last}_W"] += ds[-1].T @ dlogits
        out[f"dec{last}_b"] += dlogits.sum(axis=0)
        dd = dlogits @ P[f"dec{last}_W"].T
        for idx in range(self._n_dec - 2, -1, -1):
            da = dd * (1.0 - ds[idx + 1] * ds[idx + 1])
            out[f"dec{idx}_W"] += ds[idx].T @ da
            out[f"dec{idx}_b"] += da.sum(axis=0)
            dd = da @ P[f"dec{idx}_W"].T

        dz = dd
        if self.arch.variational:
            dmu = dz + (beta / B) * mu
            dlv = (beta / B) * 0.5 * (np.exp(lv) - 1.0)
            if xi is not None:
                dlv = dlv + dz * 0.5 * np.exp(0.5 * lv) * xi
            out["lv_W"] += hs[-1].T @ dlv
            out["lv_b"] += dlv.sum(axis=0)
            dh = dmu @ P["mu_W"].T + dlv @ P["lv_W"].T
        else:
            dmu = dz
            dh = dmu @ P["mu_W"].T
        out["mu_W"] += hs[-1].T @ dmu
        out["mu_b"] += dmu.sum(axis=0)

        for idx in range(self._n_enc - 1, -1, -1):
            da = dh * (1.0 - hs[idx + 1] * hs[idx + 1])
            out[f"enc{idx}_W"] += hs[idx].T @ da
            out[f"enc{idx}_b"] += da.sum(axis=0)
            dh = da @ P[f"enc{idx}_W"].T
        return g


@dataclass(frozen=True)
class RecsysBatch:
    X: np.ndarray
    seed: int | None
    train: bool


class RecsysProblem(MultiObjectiveProblem):
    """Recommendation training objectives over a preprocessed split.

    Objectives are chosen from relevance (plain NLL plus the KL term when
    beta > 0), revenue (price-weighted NLL) and recency (recency-weighted
    NLL). Evaluation ranks the catalog for each evaluation user from their
    fold-in interactions, excludes the fold-in items themselves, and reports
    per-axis means over users: recall against the held-out items, and
    min-max-normalized mean price / recency weight of the top k.
    """

    def __init__(
        self,
        dataset,
        arch: Architecture,
        objectives: Sequence[str],
        k: int = 10,
        beta: float = 0.0,
        eval_split: str = "validation",
    ):
        names = list(objectives)
        if len(names) < 2:
            raise ValueError("need at least two objectives")
        unknown = [n for n in names if n not in OBJECTIVES]
        if unknown:
            raise ValueError(f"unknown objectives {unknown}; choose from {OBJECTIVES}")
        if len(set(names)) != len(names):
            raise ValueError("duplicate objectives")
        if arch.n_items != len(dataset.items):
            raise ValueError(
                f"architecture expects {arch.n_items} items, dataset has "
                f"{len(dataset.items)}"
            )
        if k < 1:
            raise ValueError("k must be >= 1")
        if beta < 0.0:
            raise ValueError("beta must be >= 0")
        if eval_split not in ("validation", "test"):
            raise ValueError("eval_split must be 'validation' or 'test'")

        self.dataset = dataset
        self.model = Autoencoder(arch)
        self.objective_names = names
        self.k = k
        self.beta = float(beta)
        self.dim = self.model.n_params

        n_items = len(dataset.items)
        prices = as_vector(dataset.prices)
        if prices.shape[0] != n_items or (prices <= 0.0).any():
            raise ValueError("prices must be positive and cover every item")
        recency_w = recency_transform(as_vector(dataset.recency_raw))
        self._weights = {
            "relevance": np.ones(n_items),
            "revenue": prices,
            "recency": recency_w,
        }
        self._betas = {"relevance": self.beta, "revenue": 0.0, "recency": 0.0}
        self._norm_axis = {
            "revenue": minmax_unit(prices),
            "recency": minmax_unit(recency_w),
        }

        if eval_split == "validation":
            self._fold_in = dataset.val_fold_in
            self._held_out = dataset.val_held_out
        else:
            self._fold_in = dataset.test_fold_in
            self._held_out = dataset.test_held_out
        if self._fold_in.shape[0] == 0:
            raise ValueError(f"{eval_split} split has no evaluation users")

    def init_params(self, seed: int) -> np.ndarray:
        return self.model.init_params(seed)

    def batches(self, seed: int, batch_size: int):
        train = self.dataset.train_matrix
        order = list(range(train.shape[0]))
        RngStream(derive_seed(seed, "order")).shuffle(order)
        for j, start in enumerate(range(0, len(order), batch_size)):
            rows = order[start : start + batch_size]
            yield RecsysBatch(
                X=train[rows], seed=derive_seed(seed, "batch", j), train=True
            )

    def reference_batch(self) -> RecsysBatch:
        return RecsysBatch(X=self._fold_in, seed=None, train=False)

    def loss(self, i: int, w, batch) -> float:
        name = self.objective_names[i]
        return self.model.loss(
            w,
            batch.X,
            self._weights[name],
            beta=self._betas[name],
            seed=batch.seed,
            train=batch.train,
        )

    def grad(self, i: int, w, batch) -> np.ndarray:
        name = self.objective_names[i]
        return self.model.grad(
            w,
            batch.X,
            self._weights[name],
            beta=self._betas[name],
            seed=batch.seed,
            train=batch.train,
        )

    def eval_metrics(self, w) -> np.ndarray:
        scores = self.model.logits_scores(w, self._fold_in)
        scores = np.where(self._fold_in > 0, -np.inf, scores)
        # stable sort on negated scores: ties break toward the lower item index
        top = np.argsort(-scores, axis=1, kind="stable")[:, : self.k]
        n_users = top.shape[0]
        totals = {name: 0.0 for name in self.objective_names}
        for u in range(n_users):
            ranked = top[u]
            for name in self.objective_names:
                if name == "relevance":
                    held = self._held_out[u]
                    hits = float(held[ranked].sum())
                    denom = min(self.k, int(held.sum()))
                    totals[name] += hits / denom
                else:
                    totals[name] += float(self._norm_axis[name][ranked].mean())
        return np.array([totals[name] / n_users for name in self.objective_names])
