import numpy as np
import pytest

from mograd.numerics import derive_seed
from mograd.problems import QuadraticBatch, QuadraticProblem
from oracles import central_diff


def make_problem(**kw):
    return QuadraticProblem(centers=[[0.0, 0.0], [2.0, 0.0]], **kw)


class TestConstruction:
    def test_names_and_shape(self):
        p = make_problem()
        assert p.dim == 2
        assert p.n_objectives == 2
        assert p.objective_names == ["quad1", "quad2"]

    def test_rejects_mismatched_centers(self):
        with pytest.raises(ValueError):
            QuadraticProblem(centers=[[0.0, 0.0], [1.0, 2.0, 3.0]])

    def test_rejects_single_center(self):
        with pytest.raises(ValueError):
            QuadraticProblem(centers=[[0.0, 0.0]])

    def test_init_params_deterministic_and_bounded(self):
        p = make_problem(init_scale=2.0)
        w1 = p.init_params(123)
        w2 = p.init_params(123)
        assert np.array_equal(w1, w2)
        assert not np.array_equal(w1, p.init_params(124))
        assert np.all(np.abs(w1) <= 4.0)


class TestLossAndGradient:
    def test_loss_at_center_is_zero(self):
        p = make_problem()
        batch = p.reference_batch()
        assert p.loss(0, np.array([0.0, 0.0]), batch) == 0.0
        assert p.loss(1, np.array([2.0, 0.0]), batch) == 0.0

    def test_hand_worked_values(self):
        p = QuadraticProblem(centers=[[0.0, 0.0], [3.0, 4.0]])
        batch = p.reference_batch()
        w = np.array([1.0, 0.0])
        assert p.loss(0, w, batch) == pytest.approx(1.0)
        assert np.allclose(p.grad(0, w, batch), [2.0, 0.0])
        assert p.loss(1, w, batch) == pytest.approx(20.0)
        assert np.allclose(p.grad(1, w, batch), [-4.0, -8.0])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        p = QuadraticProblem(centers=rng.normal(size=(3, 6)).tolist())
        batch = p.reference_batch()
        for _ in range(100):
            w = rng.normal(size=6) * 3
            i = int(rng.integers(3))
            g = p.grad(i, w, batch)
            for j in range(6):
                fd = central_diff(lambda x: p.loss(i, x, batch), w, j, h=1e-4)
                assert fd == pytest.approx(g[j], rel=1e-5, abs=1e-7)

    def test_index_out_of_range(self):
        p = make_problem()
        with pytest.raises(IndexError):
            p.loss(2, np.zeros(2), p.reference_batch())


class TestBatchesAndNoise:
    def test_batches_yield_expected_count_and_seeds(self):
        p = make_problem(batches_per_epoch=4)
        batches = list(p.batches(9, batch_size=32))
        assert len(batches) == 4
        assert [b.seed for b in batches] == [
            derive_seed(9, "qbatch", i) for i in range(4)
        ]
        assert batches == list(p.batches(9, batch_size=32))

    def test_noiseless_grad_ignores_batch_seed(self):
        p = make_problem(noise_sigma=0.0)
        w = np.array([0.3, -0.7])
        g1 = p.grad(0, w, QuadraticBatch(seed=1))
        g2 = p.grad(0, w, QuadraticBatch(seed=2))
        assert np.array_equal(g1, g2)

    def test_noisy_grad_is_deterministic_per_batch(self):
        p = make_problem(noise_sigma=0.5)
        w = np.array([0.3, -0.7])
        batch = QuadraticBatch(seed=77)
        assert np.array_equal(p.grad(0, w, batch), p.grad(0, w, batch))
        assert not np.array_equal(p.grad(0, w, batch), p.grad(0, w, QuadraticBatch(seed=78)))

    def test_reference_batch_is_noise_free(self):
        p = make_problem(noise_sigma=2.0)
        w = np.array([1.0, 1.0])
        assert np.allclose(p.grad(0, w, p.reference_batch()), 2 * w)

    def test_noise_is_mean_zero(self):
        p = make_problem(noise_sigma=1.0)
        w = np.array([1.0, 1.0])
        draws = np.stack(
            [p.grad(0, w, QuadraticBatch(seed=s)) - 2 * w for s in range(4000)]
        )
        assert np.allclose(draws.mean(axis=0), 0.0, atol=0.06)
        assert np.allclose(draws.std(axis=0), 1.0, atol=0.06)

    def test_loss_is_noise_free(self):
        p = make_problem(noise_sigma=2.0)
        w = np.array([0.5, 0.5])
        assert p.loss(0, w, QuadraticBatch(seed=1)) == p.loss(0, w, QuadraticBatch(seed=2))


class TestEvalAndParetoSet:
    def test_metric_values(self):
        p = make_problem()
        assert np.allclose(p.eval_metrics(np.array([0.0, 0.0])), [1.0, 0.2])
        # L1 = 1 at (1, 0)... both losses are 1 there
        assert np.allclose(p.eval_metrics(np.array([1.0, 0.0])), [0.5, 0.5])

    def test_metrics_monotone_in_distance(self):
        p = make_problem()
        near = p.eval_metrics(np.array([0.1, 0.0]))
        far = p.eval_metrics(np.array([1.5, 0.0]))
        assert near[0] > far[0]
        assert near[1] < far[1]

    def test_segment_endpoints(self):
        p = make_problem()
        c1, c2 = p.pareto_segment()
        assert np.allclose(c1, [0.0, 0.0])
        assert np.allclose(c2, [2.0, 0.0])

    def test_segment_requires_two_objectives(self):
        p = QuadraticProblem(centers=[[0.0], [1.0], [2.0]])
        with pytest.raises(ValueError):
            p.pareto_segment()

    def test_distance_to_pareto_set(self):
        p = make_problem()
        assert p.distance_to_pareto_set(np.array([1.0, 0.0])) == pytest.approx(0.0)
        assert p.distance_to_pareto_set(np.array([1.0, 3.0])) == pytest.approx(3.0)
        # beyond an endpoint the segment distance is to the endpoint
        assert p.distance_to_pareto_set(np.array([3.0, 4.0])) == pytest.approx(np.sqrt(17.0))
