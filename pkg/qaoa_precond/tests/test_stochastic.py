import numpy as np
import pytest

from qaoa_precond import problems
from qaoa_precond import stochastic as sto
from qaoa_precond.errors import ConfigError
from qaoa_precond.optimizers import FunctionOracle
from qaoa_precond.qaoa_sim import AnsatzConfig, Evaluator
from qaoa_precond.state import OptimizerState


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def linear(c):
    c = np.asarray(c, dtype=float)
    return FunctionOracle(lambda x: float(c @ x), lambda x: c)


def diagonal_quadratic(d):
    d = np.asarray(d, dtype=float)
    return FunctionOracle(lambda x: 0.5 * float(x @ (d * x)), lambda x: d * x)


class TestGains:
    def test_first_gain(self):
        cfg = sto.SPSAConfig(a_init=0.1, A=0.0, alpha_decay=1.0)
        assert cfg.gains(0)[0] == pytest.approx(0.1)

    def test_decay(self):
        cfg = sto.SPSAConfig(a_init=1.0, c_init=0.2, A=1.0, alpha_decay=1.0, gamma_decay=0.5)
        a, c = cfg.gains(3)
        assert a == pytest.approx(1.0 / 5.0)
        assert c == pytest.approx(0.2 / 2.0)

    @pytest.mark.parametrize("kwargs", [dict(a_init=0.0), dict(c_init=-1.0), dict(A=-1.0),
                                        dict(alpha_decay=0.0), dict(gamma_decay=1.5),
                                        dict(aH_init=1.0, cH_init=None), dict(resamplings=0)])
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            sto.SPSAConfig(**kwargs)


class TestSPSA:
    def test_unbiased_on_linear_function(self):
        c = np.array([0.5, -1.0, 2.0, 0.25])
        oracle = linear(c)
        stream = rng(42)
        n = 10_000
        draws = np.array([sto.spsa_gradient(oracle, np.zeros(4), 0.1, sto.rademacher(stream, 4))[0]
                          for _ in range(n)])
        # per component the estimate is c_i plus a sum of random-sign terms
        sigma = np.sqrt((c @ c - c ** 2) / n)
        assert np.all(np.abs(draws.mean(axis=0) - c) <= 4 * sigma)

    def test_two_calls_per_step(self):
        oracle = linear([1.0, 1.0])
        sto.spsa_step(oracle, np.zeros(2), 0, sto.SPSAConfig(), rng())
        assert oracle.qcalls == 2

    def test_negative_iteration(self):
        with pytest.raises(ConfigError):
            sto.spsa_step(linear([1.0]), np.zeros(1), -1, sto.SPSAConfig(), rng())

    def test_replay(self):
        a = sto.spsa_step(diagonal_quadratic([1, 2]), np.ones(2), 3, sto.SPSAConfig(), rng(7))
        b = sto.spsa_step(diagonal_quadratic([1, 2]), np.ones(2), 3, sto.SPSAConfig(), rng(7))
        np.testing.assert_array_equal(a, b)


class TestSecondOrderSPSA:
    cfg = sto.SPSAConfig(a_init=0.01, c_init=0.1, aH_init=1.0, cH_init=0.1)

    def test_first_step_matches_spsa(self):
        theta = np.array([0.3, -0.7])
        state = OptimizerState(theta=theta)
        first = sto.spsa2_step(state, diagonal_quadratic([2, 3]), 0, self.cfg, rng(5))
        plain = sto.spsa_step(diagonal_quadratic([2, 3]), theta, 0, self.cfg, rng(5))
        np.testing.assert_allclose(first, plain)

    def test_four_calls_per_step(self):
        oracle = diagonal_quadratic([2, 3])
        sto.spsa2_step(OptimizerState(theta=np.ones(2)), oracle, 0, self.cfg, rng())
        assert oracle.qcalls == 4

    def test_hessian_average_converges(self):
        d = np.array([2.0, 3.0])
        oracle = diagonal_quadratic(d)
        state = OptimizerState(theta=np.array([0.5, -0.5]))
        stream = rng(11)
        for k in range(2000):
            state.theta = sto.spsa2_step(state, oracle, k, self.cfg, stream)
        error = np.linalg.norm(state.metric - np.diag(d)) / np.linalg.norm(np.diag(d))
        assert error < 0.2

    def test_requires_hessian_gains(self):
        with pytest.raises(ConfigError):
            sto.spsa2_step(OptimizerState(theta=np.ones(2)), diagonal_quadratic([1, 1]), 0,
                           sto.SPSAConfig(), rng())

    def test_floored_solve(self):
        # eigenvalues -2 and 1e-8 become 2 and the floor
        matrix = np.diag([-2.0, 1e-8])
        np.testing.assert_allclose(sto.floored_solve(matrix, np.array([2.0, 1e-4]), 1e-4), [1.0, 1.0])


class TestQNSPSA:
    @pytest.fixture
    def ev(self):
        return Evaluator(problems.complete_graph(3), AnsatzConfig(3, p=1))

    def test_metric_estimate_matches_exact(self, ev):
        theta = np.array([0.4, 0.3])
        exact = ev.qfim(theta).matrix
        stream = rng(3)
        estimate = np.mean([sto.qnspsa_metric_sample(ev, theta, 0.01, stream) for _ in range(2000)], axis=0)
        assert np.linalg.norm(estimate - exact) / np.linalg.norm(exact) < 0.3

    def test_running_metric_is_symmetric(self, ev):
        state = OptimizerState(theta=np.array([0.4, 0.3]))
        cfg = sto.QNSPSAConfig()
        stream = rng(8)
        for k in range(5):
            state.theta = sto.qnspsa_step(state, ev, k, cfg, stream)
            assert np.max(np.abs(state.metric - state.metric.T)) < 1e-12

    def test_six_calls_per_step(self, ev):
        sto.qnspsa_step(OptimizerState(theta=np.array([0.4, 0.3])), ev, 0, sto.QNSPSAConfig(), rng())
        assert ev.qcalls == 6

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            sto.QNSPSAConfig(alpha=0.0)


class TestRCD:
    def test_single_coordinate_moves(self):
        oracle = diagonal_quadratic([1.0, 2.0, 3.0])
        theta = np.array([1.0, 1.0, 1.0])
        stream = rng(4)
        for k in range(20):
            new = sto.rcd_step(oracle, theta, k, 0.3, 0.0, stream)
            assert np.count_nonzero(new != theta) == 1
            theta = new
        assert oracle.qcalls == 40

    def test_converges_on_separable_quadratic(self):
        d = np.array([1.0, 2.0, 0.5, 1.5])
        oracle = FunctionOracle(lambda x: 0.5 * float((x - 1.0) @ (d * (x - 1.0))), lambda x: d * (x - 1.0))
        theta = np.zeros(4)
        stream = rng(6)
        for k in range(500):
            theta = sto.rcd_step(oracle, theta, k, 0.3, 0.0, stream)
        assert np.max(np.abs(theta - 1.0)) < 1e-3
