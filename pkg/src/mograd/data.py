"""Ratings ingestion, preprocessing and synthetic dataset generation.

The pipeline turns a (user, item, rating, timestamp) table into the
artifacts training needs: ratings at or above a threshold become positive
interactions, users are shuffled into disjoint train/validation/test
groups, and each evaluation user's interactions are split into fold-in
(model input) and held-out (ground truth) parts. Item weights come along
for the ride: prices from a side table (or all ones) and a recency score
per item, the min-max-normalized timestamp of its first rating.

Everything is seeded and deterministic: user order is fixed
lexicographically before the seeded shuffle, and per-user masking uses a
seed derived from the global seed and the user id, so adding or removing
one user never reshuffles another user's mask.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from mograd.numerics import RngStream, derive_seed, minmax_unit, rand_normal

DEFAULT_THRESHOLD = 3.5
DEFAULT_RATIOS = (0.90, 0.05, 0.05)
DEFAULT_MASK_FRACTION = 0.20


@dataclass
class RatingsTable:
    """Columnar (user, item, rating, timestamp) records."""

    user: list[str]
    item: list[str]
    rating: np.ndarray
    timestamp: np.ndarray

    def __len__(self) -> int:
        return len(self.user)

    @staticmethod
    def from_rows(rows) -> "RatingsTable":
        users, items, ratings, stamps = [], [], [], []
        for u, i, r, t in rows:
            users.append(str(u))
            items.append(str(i))
            ratings.append(float(r))
            stamps.append(int(t))
        return RatingsTable(
            user=users,
            item=items,
            rating=np.asarray(ratings, dtype=np.float64),
            timestamp=np.asarray(stamps, dtype=np.int64),
        )


def load_ratings_csv(path) -> RatingsTable:
    """Read a `user,item,rating,timestamp` CSV (UTF-8, header required)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"user", "item", "rating", "timestamp"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(
                f"{path}: header must contain user,item,rating,timestamp"
            )
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(
                    (rec["user"], rec["item"], float(rec["rating"]), int(rec["timestamp"]))
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record: {exc}") from exc
    return RatingsTable.from_rows(rows)


def save_ratings_csv(table: RatingsTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "item", "rating", "timestamp"])
        for u, i, r, t in zip(table.user, table.item, table.rating, table.timestamp):
            writer.writerow([u, i, repr(float(r)), int(t)])


def load_prices_csv(path) -> dict[str, float]:
    """Read an `item,price` CSV into a dict."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"item", "price"}.issubset(reader.fieldnames):
            raise ValueError(f"{path}: header must contain item,price")
        prices = {}
        for lineno, rec in enumerate(reader, start=2):
            try:
                prices[str(rec["item"])] = float(rec["price"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record: {exc}") from exc
    return prices


def save_prices_csv(prices: dict[str, float], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "price"])
        for item in sorted(prices):
            writer.writerow([item, repr(float(prices[item]))])


def dedupe_latest(table: RatingsTable) -> RatingsTable:
    """Keep one record per (user, item): the latest timestamp, last row on ties."""
    best: dict[tuple[str, str], int] = {}
    for idx in range(len(table)):
        key = (table.user[idx], table.item[idx])
        if key not in best or table.timestamp[idx] >= table.timestamp[best[key]]:
            best[key] = idx
    keep = sorted(best.values())
    return RatingsTable(
        user=[table.user[i] for i in keep],
        item=[table.item[i] for i in keep],
        rating=table.rating[keep],
        timestamp=table.timestamp[keep],
    )


def binarize(table: RatingsTable, threshold: float = DEFAULT_THRESHOLD) -> RatingsTable:
    """Keep records with rating >= threshold; everything else is absence."""
    mask = table.rating >= threshold
    keep = [i for i in range(len(table)) if mask[i]]
    return RatingsTable(
        user=[table.user[i] for i in keep],
        item=[table.item[i] for i in keep],
        rating=table.rating[keep],
        timestamp=table.timestamp[keep],
    )


def split_users(users, ratios=DEFAULT_RATIOS, seed: int = 0):
    """Seeded disjoint partition of users into (train, validation, test).

    Counts are floor(ratio * U) for the first two groups; the remainder is
    the third, so 100 users under (0.9, 0.05, 0.05) give exactly 90/5/5.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three values summing to 1, got {ratios}")
    ordered = sorted(set(users))
    shuffled = list(ordered)
    RngStream(derive_seed(seed, "split")).shuffle(shuffled)
    n = len(shuffled)
    n_train = int(np.floor(ratios[0] * n))
    n_val = int(np.floor(ratios[1] * n))
    train = shuffled[:n_train]
    val = shuffled[n_train : n_train + n_val]
    test = shuffled[n_train + n_val :]
    if not (train and val and test):
        raise ValueError(
            f"{n} users are too few for non-empty splits at ratios {ratios}"
        )
    return train, val, test


def mask_interactions(user_items: dict[str, list[int]], fraction: float, seed: int):
    """Per-user split into fold-in and held-out item sets.

    Holds out ceil(fraction * degree) items chosen by a per-user seeded
    shuffle. Users with fewer than two interactions cannot provide both a
    non-empty fold-in and held-out set and are excluded (reported, not
    silently dropped).
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    fold_in: dict[str, list[int]] = {}
    held_out: dict[str, list[int]] = {}
    excluded: list[dict] = []
    for user in sorted(user_items):
        items = sorted(user_items[user])
        if len(items) < 2:
            excluded.append(
                {"user": user, "degree": len(items), "reason": "fewer than 2 interactions"}
            )
            continue
        shuffled = list(items)
        RngStream(derive_seed(seed, "mask", user)).shuffle(shuffled)
        # cap keeps the fold-in non-empty at extreme fractions
        n_held = min(int(np.ceil(fraction * len(items))), len(items) - 1)
        held_out[user] = sorted(shuffled[:n_held])
        fold_in[user] = sorted(shuffled[n_held:])
    return fold_in, held_out, excluded


def recency_scores(table: RatingsTable, items=None) -> np.ndarray:
    """Per-item first-rating timestamps, min-max normalized across items.

    ``items`` fixes the item order (default: sorted items of the table).
    A single distinct timestamp across all items is a degenerate range and
    maps every item to 0.5.
    """
    first: dict[str, int] = {}
    for idx in range(len(table)):
        item = table.item[idx]
        ts = int(table.timestamp[idx])
        if item not in first or ts < first[item]:
            first[item] = ts
    if items is None:
        items = sorted(first)
    missing = [i for i in items if i not in first]
    if missing:
        raise ValueError(f"no timestamps for items {missing[:5]}")
    stamps = np.array([first[i] for i in items], dtype=np.float64)
    return minmax_unit(stamps)


@dataclass
class SplitDataset:
    """Everything training and evaluation need, fully materialized."""

    items: list[str]
    prices: np.ndarray
    recency_raw: np.ndarray
    train_users: list[str]
    train_matrix: np.ndarray
    val_users: list[str]
    val_fold_in: np.ndarray
    val_held_out: np.ndarray
    test_users: list[str]
    test_fold_in: np.ndarray
    test_held_out: np.ndarray
    excluded: list[dict] = field(default_factory=list)
    seed: int = 0
    ratios: tuple = DEFAULT_RATIOS
    threshold: float = DEFAULT_THRESHOLD
    mask_fraction: float = DEFAULT_MASK_FRACTION

    def summary(self) -> dict:
        return {
            "items": len(self.items),
            "train_users": len(self.train_users),
            "val_users": len(self.val_users),
            "test_users": len(self.test_users),
            "excluded_users": len(self.excluded),
            "seed": self.seed,
            "ratios": list(self.ratios),
            "threshold": self.threshold,
            "mask_fraction": self.mask_fraction,
        }


def _interaction_matrix(users, user_items, n_items) -> np.ndarray:
    mat = np.zeros((len(users), n_items))
    for row, user in enumerate(users):
        mat[row, user_items[user]] = 1.0
    return mat


def _mask_matrices(users, fold_in, held_out, n_items):
    kept = [u for u in users if u in fold_in]
    fi = np.zeros((len(kept), n_items))
    ho = np.zeros((len(kept), n_items))
    for row, user in enumerate(kept):
        fi[row, fold_in[user]] = 1.0
        ho[row, held_out[user]] = 1.0
    return kept, fi, ho


def build_split(
    table: RatingsTable,
    prices: dict[str, float] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    ratios=DEFAULT_RATIOS,
    mask_fraction: float = DEFAULT_MASK_FRACTION,
    seed: int = 0,
) -> SplitDataset:
    """Run the full preprocessing pipeline on a ratings table."""
    raw = table
    table = dedupe_latest(table)
    positives = binarize(table, threshold)
    if len(positives) == 0:
        raise ValueError("no positive interactions after binarization")

    items = sorted(set(positives.item))
    item_index = {item: idx for idx, item in enumerate(items)}
    user_items: dict[str, list[int]] = {}
    for idx in range(len(positives)):
        user_items.setdefault(positives.user[idx], []).append(
            item_index[positives.item[idx]]
        )
    for user in user_items:
        user_items[user] = sorted(user_items[user])

    train_u, val_u, test_u = split_users(user_items.keys(), ratios, seed)
    train_matrix = _interaction_matrix(train_u, user_items, len(items))

    val_fi_map, val_ho_map, excl_val = mask_interactions(
        {u: user_items[u] for u in val_u}, mask_fraction, seed
    )
    test_fi_map, test_ho_map, excl_test = mask_interactions(
        {u: user_items[u] for u in test_u}, mask_fraction, seed
    )
    for rec in excl_val:
        rec["split"] = "validation"
    for rec in excl_test:
        rec["split"] = "test"

    val_users, val_fi, val_ho = _mask_matrices(val_u, val_fi_map, val_ho_map, len(items))
    test_users, test_fi, test_ho = _mask_matrices(
        test_u, test_fi_map, test_ho_map, len(items)
    )

    # first-availability times come from the raw table: low ratings and
    # re-rated (deduplicated) records still mark when an item appeared
    rho = recency_scores(raw, items)

    if prices is None:
        price_vec = np.ones(len(items))
    else:
        missing = [i for i in items if i not in prices]
        if missing:
            raise ValueError(f"prices missing for items {missing[:5]}")
        price_vec = np.array([float(prices[i]) for i in items])
        if (price_vec <= 0.0).any():
            raise ValueError("prices must be positive")

    return SplitDataset(
        items=items,
        prices=price_vec,
        recency_raw=rho,
        train_users=train_u,
        train_matrix=train_matrix,
        val_users=val_users,
        val_fold_in=val_fi,
        val_held_out=val_ho,
        test_users=test_users,
        test_fold_in=test_fi,
        test_held_out=test_ho,
        excluded=excl_val + excl_test,
        seed=seed,
        ratios=tuple(ratios),
        threshold=threshold,
        mask_fraction=mask_fraction,
    )


@dataclass
class SynthData:
    table: RatingsTable
    prices: dict[str, float]
    params: dict


def synth_dataset(
    num_users: int,
    num_items: int,
    seed: int,
    interactions_per_user: float = 18.0,
    clusters: int = 4,
    price_mu: float = 3.0,
    price_sigma: float = 0.5,
) -> SynthData:
    """Seeded synthetic ratings with cluster structure and item weights.

    Users and items share latent factors drawn around cluster centers, so
    users mostly rate (and like) items from their own cluster: that gives a
    collaborative signal a recommender can actually learn. Ratings are
    affinity plus noise, clipped to [0.5, 5] and rounded to half stars.
    Prices are log-normal; first-availability times are uniform over a
    ten-year window and every rating lands after its item's availability.
    """
    if num_users < 1 or num_items < 1:
        raise ValueError("num_users and num_items must be >= 1")
    if interactions_per_user < 2:
        raise ValueError("interactions_per_user must be >= 2")
    if not 1 <= clusters <= num_items:
        raise ValueError("clusters must be in [1, num_items]")

    factors = 8
    root = RngStream(derive_seed(seed, "synth"))
    item_rng = root.spawn("items")
    user_rng = root.spawn("users")

    centers = [1.5 * rand_normal(item_rng, factors) for _ in range(clusters)]
    item_vecs = np.empty((num_items, factors))
    avail = np.empty(num_items, dtype=np.int64)
    prices: dict[str, float] = {}
    t0, span = 1_000_000_000, 300_000_000
    width_i = len(str(num_items))
    item_ids = [f"i{str(j).zfill(width_i)}" for j in range(num_items)]
    for j in range(num_items):
        cluster = j % clusters
        item_vecs[j] = centers[cluster] + 0.6 * rand_normal(item_rng, factors)
        avail[j] = t0 + int(item_rng.uniform() * span)
        prices[item_ids[j]] = float(np.exp(price_mu + price_sigma * item_rng.normal()))

    rows = []
    width_u = len(str(num_users))
    t_end = t0 + span
    for uidx in range(num_users):
        user_id = f"u{str(uidx).zfill(width_u)}"
        cluster = user_rng.below(clusters)
        uvec = centers[cluster] + 0.6 * rand_normal(user_rng, factors)
        affinity = (item_vecs @ uvec) / np.sqrt(factors)
        jitter = 0.7 + 0.6 * user_rng.uniform()
        k_u = max(2, int(round(interactions_per_user * jitter)))
        k_u = min(k_u, num_items)
        # Gumbel-perturbed affinities: preference-weighted sampling w/o replacement
        gumbel = -np.log(-np.log(np.maximum(
            np.array([user_rng.uniform() for _ in range(num_items)]), 1e-12)))
        chosen = np.argsort(-(2.0 * affinity + gumbel), kind="stable")[:k_u]
        for j in chosen:
            raw = 3.75 + 0.8 * affinity[j] + 0.5 * user_rng.normal()
            rating = float(np.clip(np.round(raw * 2.0) / 2.0, 0.5, 5.0))
            ts = int(avail[j]) + int(user_rng.uniform() * (t_end - int(avail[j])))
            rows.append((user_id, item_ids[int(j)], rating, ts))

    table = RatingsTable.from_rows(rows)
    params = {
        "num_users": num_users,
        "num_items": num_items,
        "seed": seed,
        "interactions_per_user": interactions_per_user,
        "clusters": clusters,
        "price_mu": price_mu,
        "price_sigma": price_sigma,
        "rows": len(table),
    }
    return SynthData(table=table, prices=prices, params=params)
