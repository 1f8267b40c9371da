import numpy as np
import pytest
from sklearn.base import clone

from conftest import random_instance
from smisense.gradient import euclidean_gradient
from smisense.manifold import (
    GRADIENT_TOLERANCE,
    ArmijoConfig,
    LineSearchFailure,
    OptimizerConfig,
    SmiPrecoder,
    armijo_search,
    baseline_ub_precoder,
    optimize_precoder,
    retract,
    riemannian_gradient,
)
from smisense.model import CorrelationPair, Scenario, random_precoder
from smisense.rmt import smi_asymptotic, smi_upper_bound


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def on_sphere(rng, shape, power):
    f = crandn(rng, *shape)
    return f * np.sqrt(power) / np.linalg.norm(f)


def re_inner(a, b):
    return np.vdot(b, a).real


class TestRiemannianGradient:
    def test_radial_component_removed(self, rng):
        f = on_sphere(rng, (5, 2), 2.0)
        np.testing.assert_allclose(riemannian_gradient(f, -3.5 * f, 2.0), 0, atol=1e-14)

    def test_tangent_input_unchanged(self, rng):
        f = on_sphere(rng, (5, 2), 2.0)
        g = crandn(rng, 5, 2)
        g -= re_inner(f, g) / 2.0 * f
        np.testing.assert_allclose(riemannian_gradient(f, g, 2.0), g, atol=1e-14)

    def test_tangency(self, rng):
        for _ in range(100):
            p = 10 ** rng.uniform(-3, 3)
            f = on_sphere(rng, (6, 3), p)
            d = riemannian_gradient(f, 10 ** rng.uniform(-3, 3) * crandn(rng, 6, 3), p)
            assert abs(re_inner(f, d)) <= 1e-12 * p * np.linalg.norm(d)

    def test_off_sphere_rejected(self, rng):
        with pytest.raises(ValueError, match="sphere"):
            riemannian_gradient(np.ones((2, 2)), np.ones((2, 2)), 1.0)


class TestRetraction:
    def test_zero_tangent(self, rng):
        f = on_sphere(rng, (4, 2), 3.0)
        np.testing.assert_allclose(retract(f, 0.0, 3.0), f, rtol=1e-15)

    def test_lands_on_sphere(self, rng):
        for _ in range(200):
            p = 10 ** rng.uniform(-3, 3)
            x = retract(crandn(rng, 4, 3), 10 ** rng.uniform(-6, 3) * crandn(rng, 4, 3), p)
            assert abs(np.vdot(x, x).real - p) <= 1e-12 * p

    def test_degenerate(self):
        with pytest.raises(ValueError):
            retract(np.ones((2, 1)), -np.ones((2, 1)), 1.0)

    def test_second_order_deviation(self, rng):
        f = on_sphere(rng, (6, 3), 1.0)
        d = riemannian_gradient(f, crandn(rng, 6, 3), 1.0)
        d /= np.linalg.norm(d)
        sizes = np.logspace(-2, -5, 7)
        dev = [np.linalg.norm(retract(f, s * d, 1.0) - (f + s * d)) for s in sizes]
        slope = np.polyfit(np.log(sizes), np.log(dev), 1)[0]
        assert abs(slope - 2.0) <= 0.2


class TestArmijo:
    def test_concave_quadratic(self, rng):
        target = on_sphere(rng, (4, 2), 1.0)
        obj = lambda x: -np.linalg.norm(x - target) ** 2
        f = on_sphere(rng, (4, 2), 1.0)
        grad = riemannian_gradient(f, target - f, 1.0)
        res = armijo_search(obj, f, grad, ArmijoConfig(), 1.0)
        assert res.value > obj(f)
        assert abs(np.linalg.norm(res.precoder) ** 2 - 1.0) <= 1e-12

    def test_smi_direction_accepted(self, desk, rng):
        sc, corr = desk
        f = random_precoder(8, 3, sc.power_budget, seed=4)
        d = riemannian_gradient(f, euclidean_gradient(corr, f, sc).grad, sc.power_budget)
        res = armijo_search(lambda x: smi_asymptotic(corr, x, sc).nats, f, d,
                            ArmijoConfig(), sc.power_budget)
        assert res.backtracks <= 30
        assert res.value >= smi_asymptotic(corr, f, sc).nats

    def test_tiny_direction_accepted_immediately(self, desk):
        sc, corr = desk
        f = random_precoder(8, 3, sc.power_budget, seed=4)
        d = riemannian_gradient(f, euclidean_gradient(corr, f, sc).grad, sc.power_budget)
        res = armijo_search(lambda x: smi_asymptotic(corr, x, sc).nats, f, 1e-12 * d,
                            ArmijoConfig(), sc.power_budget)
        assert res.backtracks == 0
        assert res.step == 1.0

    def test_descent_direction_rejected(self, rng):
        f = on_sphere(rng, (3, 1), 1.0)
        d = riemannian_gradient(f, crandn(rng, 3, 1), 1.0)
        with pytest.raises(LineSearchFailure):
            armijo_search(lambda x: 0.0, f, d, ArmijoConfig(), 1.0, grad=-d)

    def test_exhausted_backtracks(self, rng):
        f = on_sphere(rng, (3, 1), 1.0)
        d = riemannian_gradient(f, crandn(rng, 3, 1), 1.0)
        obj = lambda x: -np.linalg.norm(x - f)
        with pytest.raises(LineSearchFailure):
            armijo_search(obj, f, d, ArmijoConfig(max_backtracks=5), 1.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ArmijoConfig(contraction=1.0)
        with pytest.raises(ValueError):
            ArmijoConfig(sufficient_decrease=0.0)
        with pytest.raises(ValueError):
            OptimizerConfig(objective="nope")


def check_trace(trace, power):
    objs = trace.objectives()
    assert np.all(np.diff(objs) >= 0)
    assert trace.n_iters <= 50
    assert abs(np.vdot(trace.precoder, trace.precoder).real - power) <= 1e-9 * power


class TestOptimizer:
    @pytest.mark.parametrize("objective", ["asymptotic-smi", "upper-bound-smi"])
    def test_rank_one_recovers_eigenbeam(self, rng, objective):
        u = crandn(rng, 6)
        u /= np.linalg.norm(u)
        sc = Scenario(6, 3, 1, 4, noise_power=0.1, power_budget=2.0)
        corr = CorrelationPair(3.0 * np.outer(u, u.conj()),
                               np.outer(np.ones(3), np.ones(3)), max_rank=1)
        cfg = OptimizerConfig(objective=objective, init="scaled-random", seed=3)
        trace = optimize_precoder(corr, sc, cfg)
        check_trace(trace, 2.0)
        fn = smi_asymptotic if objective == "asymptotic-smi" else smi_upper_bound
        best = fn(corr, np.sqrt(2.0) * u[:, None], sc).nats
        assert abs(trace.objective - best) <= 1e-6 * best
        overlap = abs(np.vdot(u, trace.precoder[:, 0])) / np.sqrt(2.0)
        assert overlap == pytest.approx(1.0, abs=1e-6)

    def test_symmetric_upper_bound_optimum(self, rng):
        n_tx, n_rx, lam, p = 4, 3, 2.5, 3.0
        sc = Scenario(n_tx, n_rx, n_tx, 8, noise_power=0.2, power_budget=p)
        corr = CorrelationPair(np.eye(n_tx), lam * 0.2 * np.eye(n_rx), max_rank=n_tx)
        cfg = OptimizerConfig(objective="upper-bound-smi", init="scaled-random", seed=1,
                              max_iters=200)
        trace = baseline_ub_precoder(corr, sc, cfg)
        best = n_rx * n_tx * np.log1p(lam * p / n_tx)
        assert abs(trace.objective - best) <= 1e-6
        assert trace.termination == GRADIENT_TOLERANCE

    def test_improves_on_random_start(self, rng):
        for _ in range(50):
            sc, corr, _ = random_instance(rng)
            cfg = OptimizerConfig(init="scaled-random", seed=int(rng.integers(1 << 30)),
                                  max_iters=5)
            start = smi_asymptotic(corr, random_precoder(sc.n_tx, sc.n_targets,
                                                         sc.power_budget, cfg.seed), sc).nats
            trace = optimize_precoder(corr, sc, cfg)
            check_trace(trace, sc.power_budget)
            assert trace.objective >= start

    def test_desk_trace_invariants(self, desk):
        sc, corr = desk
        trace = optimize_precoder(corr, sc)
        check_trace(trace, sc.power_budget)
        assert trace.records[-1].grad_norm <= trace.records[0].grad_norm
        assert trace.n_iters == 50 or trace.records[-1].grad_norm <= 1e-5
        for rec in trace.records[1:]:
            assert rec.step > 0

    def test_deterministic(self, desk):
        sc, corr = desk
        cfg = OptimizerConfig(init="scaled-random", seed=9, max_iters=10)
        a = baseline_ub_precoder(corr, sc, cfg)
        b = baseline_ub_precoder(corr, sc, cfg)
        assert a.records == b.records
        np.testing.assert_array_equal(a.precoder, b.precoder)

    def test_each_optimizer_wins_its_own_objective(self, rng):
        for _ in range(20):
            sc, corr, _ = random_instance(rng, k=int(rng.integers(1, 4)))
            cfg = OptimizerConfig(max_iters=80, grad_norm_tol=1e-7)
            smi_arm = optimize_precoder(corr, sc, cfg).precoder
            ub_arm = baseline_ub_precoder(corr, sc, cfg).precoder
            slack = 1e-6
            assert (smi_upper_bound(corr, ub_arm, sc).nats
                    >= smi_upper_bound(corr, smi_arm, sc).nats - slack)
            assert (smi_asymptotic(corr, smi_arm, sc).nats
                    >= smi_asymptotic(corr, ub_arm, sc).nats - slack)

    def test_zero_iterations(self, desk):
        sc, corr = desk
        trace = optimize_precoder(corr, sc, OptimizerConfig(max_iters=0))
        assert trace.n_iters == 0


class TestEstimatorApi:
    def test_params_and_clone(self):
        est = SmiPrecoder(max_iters=7, init="scaled-random")
        params = est.get_params()
        assert params["max_iters"] == 7 and params["init"] == "scaled-random"
        twin = clone(est)
        assert twin.get_params() == params
        assert not hasattr(twin, "precoder_")

    def test_fit_and_score(self, desk):
        sc, corr = desk
        est = SmiPrecoder(max_iters=5).fit(corr, sc)
        assert est.precoder_.shape == (8, 3)
        assert est.score(corr, sc) == pytest.approx(est.objective_, rel=1e-15)
        ref = optimize_precoder(corr, sc, OptimizerConfig(max_iters=5))
        np.testing.assert_array_equal(est.precoder_, ref.precoder)

    def test_unfitted_score(self, desk):
        sc, corr = desk
        with pytest.raises(AttributeError):
            SmiPrecoder().score(corr, sc)
