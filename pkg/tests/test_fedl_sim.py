"""Desk-scale federated training loop on synthetic tasks."""

import numpy as np
import pytest

from msfedl.errors import InvalidParameterError
from msfedl.fedl_sim import (contraction_envelope, learning_globals_for,
                             local_train, make_synthetic_task, run_fedl,
                             surrogate_grad)
from msfedl.learning import fedl_constants, optimal_eta


@pytest.fixture(scope="module")
def linear_task():
    return make_synthetic_task(3, n_ues=5, dim=10, samples_per_ue=40)


class TestTaskConstruction:
    def test_deterministic(self):
        a = make_synthetic_task(1, 3, 4, 10)
        b = make_synthetic_task(1, 3, 4, 10)
        for xa, xb in zip(a.features, b.features):
            np.testing.assert_array_equal(xa, xb)

    def test_measured_constants_bracket_curvature(self, linear_task):
        t = linear_task
        assert t.smoothness >= t.strong_convexity > 0
        assert t.strong_convexity >= t.regularizer  # ridge floor
        assert t.condition_number >= 1.0

    def test_unbalanced_sizes(self, linear_task):
        sizes = linear_task.sizes
        assert sizes.min() >= 20 and sizes.max() <= 60
        assert len(set(sizes)) > 1

    def test_logistic_family(self):
        t = make_synthetic_task(2, 3, 4, 20, family="logistic")
        assert set(np.unique(np.concatenate(t.labels))) <= {-1.0, 1.0}
        w = np.zeros(4)
        val, grad = t.global_loss_grad(w)
        assert val > 0 and grad.shape == (4,)

    def test_rejects_bad_family(self):
        with pytest.raises(InvalidParameterError):
            make_synthetic_task(0, 2, 2, 5, family="hinge")

    def test_rejects_bad_counts(self):
        with pytest.raises(InvalidParameterError):
            make_synthetic_task(0, 0, 2, 5)


class TestGradients:
    def test_global_is_size_weighted_average(self, linear_task):
        t = linear_task
        rng = np.random.default_rng(0)
        w = rng.normal(size=t.dim)
        gval, ggrad = t.global_loss_grad(w)
        weights = t.sizes / t.sizes.sum()
        mval = sum(weights[n] * t.local_loss_grad(n, w)[0]
                   for n in range(t.n_ues))
        mgrad = sum(weights[n] * t.local_loss_grad(n, w)[1]
                    for n in range(t.n_ues))
        assert gval == pytest.approx(mval, rel=1e-12)
        np.testing.assert_allclose(ggrad, mgrad, atol=1e-12)

    def test_local_gradient_finite_difference(self, linear_task):
        t = linear_task
        rng = np.random.default_rng(1)
        w = rng.normal(size=t.dim)
        _, g = t.local_loss_grad(0, w)
        for i in range(t.dim):
            h = 1e-6
            wp, wm = w.copy(), w.copy()
            wp[i] += h
            wm[i] -= h
            fd = (t.local_loss_grad(0, wp)[0]
                  - t.local_loss_grad(0, wm)[0]) / (2 * h)
            assert fd == pytest.approx(g[i], abs=1e-7)

    def test_surrogate_shifts_by_constant(self, linear_task):
        t = linear_task
        rng = np.random.default_rng(2)
        w, pseudo = rng.normal(size=t.dim), rng.normal(size=t.dim)
        np.testing.assert_allclose(surrogate_grad(t, 0, w, pseudo),
                                   t.local_loss_grad(0, w)[1] + pseudo,
                                   atol=1e-14)

    def test_reference_optimum_is_stationary(self, linear_task):
        w_star = linear_task.minimize_global()
        _, g = linear_task.global_loss_grad(w_star)
        assert np.linalg.norm(g) < 1e-10


class TestLocalTrain:
    def test_postcondition(self, linear_task):
        t = linear_task
        w0 = np.zeros(t.dim)
        _, g_glob = t.global_loss_grad(w0)
        theta = 0.1
        w, iters, ok = local_train(t, 0, w0, g_glob, eta=0.2, theta=theta)
        assert ok and iters >= 1
        pseudo = 0.2 * g_glob - t.local_loss_grad(0, w0)[1]
        g_end = surrogate_grad(t, 0, w, pseudo)
        g_start = surrogate_grad(t, 0, w0, pseudo)
        assert np.linalg.norm(g_end) <= theta * np.linalg.norm(g_start)

    def test_tighter_accuracy_needs_more_iterations(self, linear_task):
        t = linear_task
        w0 = np.zeros(t.dim)
        _, g_glob = t.global_loss_grad(w0)
        iters = [local_train(t, 0, w0, g_glob, 0.2, th)[1]
                 for th in (0.4, 0.1, 0.02)]
        assert iters == sorted(iters)

    def test_invalid_inputs(self, linear_task):
        with pytest.raises(InvalidParameterError):
            local_train(linear_task, 0, np.zeros(10), np.zeros(10), 0.0, 0.1)
        with pytest.raises(InvalidParameterError):
            local_train(linear_task, 0, np.zeros(10), np.zeros(10), 0.2, 1.0)


class TestFedlLoop:
    def test_converges_and_respects_envelope(self, linear_task):
        t = linear_task
        theta = 0.1
        lg = learning_globals_for(t)
        k = fedl_constants(theta, lg)
        eta = optimal_eta(k)
        run = run_fedl(t, eta, theta, rounds=40)
        assert run.theta_satisfied
        assert run.loss_gaps[-1] < 1e-6 * run.loss_gaps[0]
        env = contraction_envelope(k, eta, run.loss_gaps[0], 40)
        assert np.all(run.loss_gaps <= env * (1 + 1e-9))

    def test_trace_shapes(self, linear_task):
        run = run_fedl(linear_task, 0.2, 0.2, rounds=5)
        assert run.loss_gaps.shape == (6,)
        assert run.local_iters.shape == (5, linear_task.n_ues)
        assert run.w_final.shape == (linear_task.dim,)

    def test_final_weights_near_optimum(self, linear_task):
        run = run_fedl(linear_task, 0.2, 0.1, rounds=40)
        w_star = linear_task.minimize_global()
        assert np.linalg.norm(run.w_final - w_star) < 1e-3

    def test_csv_schema(self, linear_task):
        run = run_fedl(linear_task, 0.2, 0.2, rounds=3)
        text = run.to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "round,loss_gap,theta_bound_gap"
        assert len(lines) == 5
        assert "np.float64" not in text

    def test_logistic_loop_decreases(self):
        t = make_synthetic_task(5, 3, 4, 30, family="logistic")
        run = run_fedl(t, 0.2, 0.2, rounds=10)
        assert run.loss_gaps[-1] < run.loss_gaps[0]
