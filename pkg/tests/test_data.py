import numpy as np
import pytest

from mograd.data import (
    RatingsTable,
    binarize,
    build_split,
    dedupe_latest,
    load_prices_csv,
    load_ratings_csv,
    mask_interactions,
    recency_scores,
    save_prices_csv,
    save_ratings_csv,
    split_users,
    synth_dataset,
)


def table_of(*rows) -> RatingsTable:
    return RatingsTable.from_rows(rows)


class TestCsvIO:
    def test_ratings_round_trip(self, tmp_path):
        t = table_of(("u1", "i1", 4.5, 100), ("u2", "i2", 2.0, 200))
        path = tmp_path / "r.csv"
        save_ratings_csv(t, path)
        back = load_ratings_csv(path)
        assert back.user == t.user and back.item == t.item
        assert np.array_equal(back.rating, t.rating)
        assert np.array_equal(back.timestamp, t.timestamp)

    def test_ratings_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c,d\n1,2,3,4\n")
        with pytest.raises(ValueError, match="header"):
            load_ratings_csv(path)

    def test_ratings_bad_record_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("user,item,rating,timestamp\nu1,i1,ok,100\n")
        with pytest.raises(ValueError, match=":2:"):
            load_ratings_csv(path)

    def test_prices_round_trip(self, tmp_path):
        prices = {"i2": 4.25, "i1": 1.5}
        path = tmp_path / "p.csv"
        save_prices_csv(prices, path)
        assert load_prices_csv(path) == prices

    def test_prices_header_required(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("sku,cost\ni1,2\n")
        with pytest.raises(ValueError, match="header"):
            load_prices_csv(path)


class TestDedupeAndBinarize:
    def test_dedupe_keeps_latest(self):
        t = table_of(("u", "i", 2.0, 100), ("u", "i", 5.0, 300), ("u", "i", 3.0, 200))
        out = dedupe_latest(t)
        assert len(out) == 1
        assert out.rating[0] == 5.0

    def test_dedupe_tie_prefers_later_row(self):
        t = table_of(("u", "i", 2.0, 100), ("u", "i", 4.0, 100))
        out = dedupe_latest(t)
        assert out.rating[0] == 4.0

    def test_binarize_threshold_boundary(self):
        t = table_of(("u1", "a", 3.5, 1), ("u2", "b", 3.49, 2), ("u3", "c", 5.0, 3))
        out = binarize(t)
        assert out.item == ["a", "c"]

    def test_binarize_custom_threshold(self):
        t = table_of(("u1", "a", 3.0, 1), ("u2", "b", 2.9, 2))
        assert binarize(t, threshold=3.0).item == ["a"]


class TestSplitUsers:
    def test_hundred_users_split_90_5_5(self):
        users = [f"u{i:03d}" for i in range(100)]
        train, val, test = split_users(users, seed=1)
        assert (len(train), len(val), len(test)) == (90, 5, 5)
        assert set(train) | set(val) | set(test) == set(users)
        assert set(train) & set(val) == set()
        assert set(train) & set(test) == set()
        assert set(val) & set(test) == set()

    def test_deterministic_and_seed_sensitive(self):
        users = [f"u{i}" for i in range(40)]
        assert split_users(users, seed=3) == split_users(users, seed=3)
        assert split_users(users, seed=3) != split_users(users, seed=4)

    def test_input_order_is_irrelevant(self):
        users = [f"u{i}" for i in range(30)]
        assert split_users(users, seed=5) == split_users(reversed(users), seed=5)

    def test_validation(self):
        with pytest.raises(ValueError):
            split_users(["a", "b"], ratios=(0.5, 0.5), seed=0)
        with pytest.raises(ValueError):
            split_users(["a", "b"], ratios=(0.8, 0.1, 0.2), seed=0)
        with pytest.raises(ValueError, match="too few"):
            split_users(["a", "b"], seed=0)


class TestMasking:
    def test_ceil_of_fraction(self):
        degrees = {2: 1, 5: 1, 6: 2, 7: 2, 10: 2, 11: 3}
        for degree, expected in degrees.items():
            user_items = {"u": list(range(degree))}
            fold, held, excl = mask_interactions(user_items, 0.2, seed=0)
            assert len(held["u"]) == expected, degree
            assert len(fold["u"]) == degree - expected
            assert excl == []

    def test_partition_without_overlap(self):
        user_items = {"a": [3, 1, 4, 1 + 4, 9], "b": [2, 6]}
        fold, held, _ = mask_interactions(user_items, 0.2, seed=7)
        for user in user_items:
            assert set(fold[user]) & set(held[user]) == set()
            assert sorted(fold[user] + held[user]) == sorted(user_items[user])

    def test_low_degree_users_reported(self):
        fold, held, excl = mask_interactions({"a": [1], "b": [1, 2], "c": []}, 0.2, 0)
        assert sorted(e["user"] for e in excl) == ["a", "c"]
        assert all("fewer than 2" in e["reason"] for e in excl)
        assert set(fold) == {"b"}

    def test_per_user_masks_are_independent(self):
        items = {"a": [1, 2, 3, 4, 5], "b": [1, 2, 3, 4, 5]}
        fold_ab, held_ab, _ = mask_interactions(items, 0.2, seed=9)
        fold_a, held_a, _ = mask_interactions({"a": items["a"]}, 0.2, seed=9)
        assert fold_ab["a"] == fold_a["a"]
        assert held_ab["a"] == held_a["a"]

    def test_extreme_fraction_keeps_fold_in_nonempty(self):
        fold, held, _ = mask_interactions({"u": [1, 2]}, 0.9, seed=0)
        assert len(fold["u"]) == 1 and len(held["u"]) == 1

    def test_fraction_bounds(self):
        for bad in (0.0, 1.0, -0.2):
            with pytest.raises(ValueError):
                mask_interactions({"u": [1, 2]}, bad, seed=0)


class TestRecencyScores:
    def test_first_timestamp_and_normalization(self):
        t = table_of(
            ("u1", "a", 1.0, 100),  # low rating still sets availability
            ("u2", "a", 5.0, 900),
            ("u1", "b", 4.0, 500),
            ("u2", "c", 4.0, 900),
        )
        rho = recency_scores(t, items=["a", "b", "c"])
        assert np.allclose(rho, [0.0, 0.5, 1.0])

    def test_degenerate_range_maps_to_half(self):
        t = table_of(("u1", "a", 4.0, 100), ("u2", "b", 4.0, 100))
        assert np.allclose(recency_scores(t), [0.5, 0.5])

    def test_missing_item_rejected(self):
        t = table_of(("u1", "a", 4.0, 100))
        with pytest.raises(ValueError, match="no timestamps"):
            recency_scores(t, items=["a", "zzz"])


def dense_table(n_users=100, n_items=12, degree=6):
    rows = []
    for u in range(n_users):
        for d in range(degree):
            item = (u + d) % n_items
            rating = 4.0 if d < degree - 1 else 2.0  # one negative per user
            rows.append((f"u{u:03d}", f"i{item:02d}", rating, 1000 + item))
    return RatingsTable.from_rows(rows)


class TestBuildSplit:
    def test_counts_and_shapes(self):
        split = build_split(dense_table(), seed=5)
        assert len(split.train_users) == 90
        assert len(split.val_users) == 5
        assert len(split.test_users) == 5
        assert split.train_matrix.shape == (90, len(split.items))
        assert split.val_fold_in.shape == split.val_held_out.shape
        s = split.summary()
        assert s["train_users"] == 90 and s["items"] == len(split.items)

    def test_no_leakage_between_fold_in_and_held_out(self):
        split = build_split(dense_table(), seed=5)
        for fi, ho in ((split.val_fold_in, split.val_held_out),
                       (split.test_fold_in, split.test_held_out)):
            assert np.all(fi * ho == 0.0)
            assert np.all(fi.sum(axis=1) >= 1)
            assert np.all(ho.sum(axis=1) >= 1)

    def test_mask_sizes_follow_ceil_rule(self):
        split = build_split(dense_table(), seed=5)
        # every user has 5 positives -> ceil(0.2 * 5) = 1 held out
        assert np.all(split.val_held_out.sum(axis=1) == 1)
        assert np.all(split.val_fold_in.sum(axis=1) == 4)

    def test_vocabulary_excludes_never_positive_items(self):
        rows = [("u%d" % u, "good%d" % (u % 3), 4.0, 100 + u) for u in range(30)]
        rows += [("u%d" % u, "good%d" % ((u + 1) % 3), 4.5, 200 + u) for u in range(30)]
        rows += [("u%d" % u, "junk", 1.0, 50) for u in range(30)]
        split = build_split(RatingsTable.from_rows(rows), seed=2, ratios=(0.5, 0.25, 0.25))
        assert split.items == ["good0", "good1", "good2"]

    def test_recency_counts_low_rated_first_appearance(self):
        rows = [("u%d" % u, "a", 4.0, 1000) for u in range(20)]
        rows += [("u%d" % u, "b", 4.0, 2000) for u in range(20)]
        rows.append(("u0", "b", 1.0, 0))  # b actually appeared first, rated low
        split = build_split(RatingsTable.from_rows(rows), seed=1, ratios=(0.5, 0.25, 0.25))
        idx = {item: i for i, item in enumerate(split.items)}
        assert split.recency_raw[idx["b"]] == 0.0
        assert split.recency_raw[idx["a"]] == 1.0

    def test_duplicate_ratings_collapse_before_thresholding(self):
        # u0 re-rated item i00 below threshold later: the item must not count
        rows = [("u0", "i00", 5.0, 100), ("u0", "i00", 1.0, 200)]
        rows += [("u0", "i01", 4.0, 10), ("u0", "i02", 4.0, 10)]
        rows += [(f"u{u}", f"i{u % 3:02d}", 4.0, 300) for u in range(1, 30)]
        split = build_split(RatingsTable.from_rows(rows), seed=3, ratios=(0.5, 0.25, 0.25))
        users = split.train_users + split.val_users + split.test_users
        if "u0" in split.train_users:
            row = split.train_matrix[split.train_users.index("u0")]
            assert row[split.items.index("i00")] == 0.0
        assert "u0" in users

    def test_prices_default_and_validation(self):
        t = dense_table()
        assert np.all(build_split(t, seed=1).prices == 1.0)
        with pytest.raises(ValueError, match="missing"):
            build_split(t, prices={"i00": 2.0}, seed=1)
        full = {f"i{i:02d}": 1.0 for i in range(12)}
        with pytest.raises(ValueError, match="positive"):
            build_split(t, prices={**full, "i00": 0.0}, seed=1)

    def test_deterministic_per_seed(self):
        t = dense_table()
        a = build_split(t, seed=9)
        b = build_split(t, seed=9)
        c = build_split(t, seed=10)
        assert a.train_users == b.train_users
        assert np.array_equal(a.val_fold_in, b.val_fold_in)
        assert a.train_users != c.train_users

    def test_empty_after_binarize_rejected(self):
        t = table_of(("u1", "a", 1.0, 1), ("u2", "b", 2.0, 2))
        with pytest.raises(ValueError, match="no positive"):
            build_split(t, seed=0)


class TestSynthDataset:
    def test_deterministic_per_seed(self):
        a = synth_dataset(50, 20, seed=4)
        b = synth_dataset(50, 20, seed=4)
        c = synth_dataset(50, 20, seed=5)
        assert a.table.user == b.table.user
        assert np.array_equal(a.table.rating, b.table.rating)
        assert a.prices == b.prices
        assert not np.array_equal(
            np.sort(a.table.timestamp), np.sort(c.table.timestamp)
        )

    def test_density_near_target(self):
        synth = synth_dataset(400, 60, seed=8, interactions_per_user=12.0)
        per_user = len(synth.table) / 400
        assert abs(per_user - 12.0) / 12.0 < 0.10

    def test_ratings_are_half_stars_in_range(self):
        synth = synth_dataset(60, 25, seed=2)
        r = synth.table.rating
        assert np.all((r >= 0.5) & (r <= 5.0))
        assert np.allclose(r * 2, np.round(r * 2))

    def test_positives_are_plentiful(self):
        synth = synth_dataset(200, 40, seed=3)
        share = float((synth.table.rating >= 3.5).mean())
        assert share > 0.35

    def test_prices_cover_catalog(self):
        synth = synth_dataset(30, 15, seed=1)
        assert len(synth.prices) == 15
        assert all(p > 0 for p in synth.prices.values())
        assert set(synth.prices) == set(synth.table.item) | set(synth.prices)

    def test_ids_are_zero_padded(self):
        synth = synth_dataset(120, 101, seed=1)
        assert all(len(u) == 4 for u in synth.table.user)
        assert all(len(i) == 4 for i in synth.table.item)

    def test_timestamps_in_window(self):
        synth = synth_dataset(40, 20, seed=6)
        ts = synth.table.timestamp
        assert ts.min() >= 1_000_000_000
        assert ts.max() <= 1_300_000_000

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            synth_dataset(0, 10, seed=1)
        with pytest.raises(ValueError):
            synth_dataset(10, 10, seed=1, interactions_per_user=1.0)
        with pytest.raises(ValueError):
            synth_dataset(10, 10, seed=1, clusters=11)

    def test_params_echo_configuration(self):
        synth = synth_dataset(30, 10, seed=7, clusters=2)
        assert synth.params["num_users"] == 30
        assert synth.params["clusters"] == 2
        assert synth.params["rows"] == len(synth.table)

    def test_feeds_build_split(self):
        synth = synth_dataset(100, 30, seed=12)
        split = build_split(synth.table, prices=synth.prices, seed=12)
        assert len(split.train_users) == pytest.approx(0.9 * (
            len(split.train_users) + len(split.val_users) + len(split.test_users)
        ), abs=2)
        assert split.val_fold_in.shape[0] >= 1
