"""
Metric-preconditioned steps: quantum natural gradient, momentum and the
Broyden-filtered inverse metric used by qBroyden, qBang and m-QNG.

All metrics here are Fubini-Study tensors ``g`` as returned by
``Evaluator.qfim``; inversion is regularized by ``lam * I``.
"""

import logging

import numpy as np
import scipy.linalg

from qaoa_precond.errors import ConfigError, MetricInversionError, UpdateSkipped
from qaoa_precond.qaoa_sim import Approximation
from qaoa_precond.quasi_newton import symmetrize
from qaoa_precond.state import OptimizerState

logger = logging.getLogger(__name__)

DEFAULT_REGULARIZER = 1e-6
BROYDEN_FLOOR = 1e-12
ADAPTIVE_DELTA = 1e-8


def metric_solve(metric: np.ndarray, rhs: np.ndarray, lam: float = DEFAULT_REGULARIZER) -> np.ndarray:
    """Solve ``(metric + lam I) d = rhs``; ``rhs`` may be a vector or a matrix."""
    shifted = metric + lam * np.eye(metric.shape[0])
    try:
        solution = scipy.linalg.solve(shifted, rhs, assume_a="gen", check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise MetricInversionError(f"metric solve failed with lam={lam:g}: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise MetricInversionError(f"metric solve produced non-finite values with lam={lam:g}")
    return solution


def metric_inverse(metric: np.ndarray, lam: float = DEFAULT_REGULARIZER) -> np.ndarray:
    return symmetrize(metric_solve(metric, np.eye(metric.shape[0]), lam))


#------------------------------------------------------------------------
# Quantum natural gradient
#------------------------------------------------------------------------
def qng_direction(oracle, theta: np.ndarray, approx=Approximation.BLOCK_DIAGONAL,
                  lam: float = DEFAULT_REGULARIZER, gradient: np.ndarray = None) -> np.ndarray:
    gradient = oracle.gradient(theta) if gradient is None else gradient
    metric = oracle.qfim(theta, approx).matrix
    return metric_solve(metric, gradient, lam)


def qng_step(oracle, theta: np.ndarray, alpha: float, approx=Approximation.BLOCK_DIAGONAL,
             lam: float = DEFAULT_REGULARIZER, gradient: np.ndarray = None) -> np.ndarray:
    """``theta - alpha * (g + lam I)^-1 grad f``."""
    if not alpha > 0:
        raise ConfigError(f"learning rate must be positive, got {alpha}")
    return theta - alpha * qng_direction(oracle, theta, approx, lam, gradient)


def momentum_step(state: OptimizerState, direction: np.ndarray, m: float, alpha: float) -> np.ndarray:
    """Heavy-ball update ``v = m v - alpha d``; returns ``theta + v``."""
    if not 0.0 <= m <= 1.0:
        raise ConfigError(f"momentum must be in [0, 1], got {m}")
    velocity = np.zeros_like(direction) if state.velocity is None else state.velocity
    state.velocity = m * velocity - alpha * direction
    return state.theta + state.velocity


#------------------------------------------------------------------------
# Broyden low-pass filter of the inverse metric
#------------------------------------------------------------------------
def qbroyden_metric_update(B_inv: np.ndarray, gradient: np.ndarray, eps: float) -> np.ndarray:
    """
    Inverse of ``(1 - eps) B + eps g g'`` by Sherman-Morrison.

    ::

        B_inv' = B_inv / (1 - eps) - eps u u' / ((1 - eps) (1 - eps + eps g'u)),  u = B_inv g
    """
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps must be in (0, 1), got {eps}")
    u = B_inv @ gradient
    denom = 1.0 - eps + eps * float(gradient @ u)
    if abs(denom) <= BROYDEN_FLOOR:
        raise UpdateSkipped("qbroyden", f"Sherman-Morrison denominator {denom:.3e}")
    return symmetrize(B_inv / (1.0 - eps) - eps * np.outer(u, u) / ((1.0 - eps) * denom))


def _initial_inverse_metric(state: OptimizerState, oracle, lam: float) -> np.ndarray:
    if state.B is None:
        state.B = metric_inverse(oracle.qfim(state.theta, Approximation.BLOCK_DIAGONAL).matrix, lam)
    return state.B


def _filter_inverse_metric(state: OptimizerState, gradient: np.ndarray, eps: float):
    try:
        state.B = qbroyden_metric_update(state.B, gradient, eps)
    except UpdateSkipped as skip:
        state.skipped_updates += 1
        logger.debug("%s", skip)


def qbroyden_step(state: OptimizerState, oracle, alpha: float, eps: float,
                  lam: float = DEFAULT_REGULARIZER, gradient: np.ndarray = None) -> np.ndarray:
    gradient = oracle.gradient(state.theta) if gradient is None else gradient
    B_inv = _initial_inverse_metric(state, oracle, lam)
    theta_new = state.theta - alpha * (B_inv @ gradient)
    _filter_inverse_metric(state, gradient, eps)
    return theta_new


def _adam_moments(state: OptimizerState, value: np.ndarray, beta1: float, beta2: float):
    t = state.iteration + 1
    if state.m1 is None:
        state.m1 = np.zeros_like(value)
        state.m2 = np.zeros_like(value)
    state.m1 = beta1 * state.m1 + (1.0 - beta1) * value
    state.m2 = beta2 * state.m2 + (1.0 - beta2) * value ** 2
    return state.m1 / (1.0 - beta1 ** t), state.m2 / (1.0 - beta2 ** t)


def qbang_step(state: OptimizerState, oracle, alpha: float, eps: float, beta1: float, beta2: float,
               lam: float = DEFAULT_REGULARIZER, delta: float = ADAPTIVE_DELTA,
               gradient: np.ndarray = None) -> np.ndarray:
    """
    Broyden-filtered natural gradient with Adam-style moments.

    The first call builds the inverse metric from the block-diagonal
    Fubini-Study tensor.  The step is ``alpha * B_inv m1_hat / (sqrt(m2_hat) + delta)``
    elementwise, after which the inverse metric absorbs the current gradient.
    """
    gradient = oracle.gradient(state.theta) if gradient is None else gradient
    B_inv = _initial_inverse_metric(state, oracle, lam)
    m1_hat, m2_hat = _adam_moments(state, gradient, beta1, beta2)
    direction = (B_inv @ m1_hat) / (np.sqrt(m2_hat) + delta)
    theta_new = state.theta - alpha * direction
    _filter_inverse_metric(state, gradient, eps)
    return theta_new


def mqng_step(state: OptimizerState, oracle, alpha: float, eps: float, beta1: float, beta2: float,
              lam: float = DEFAULT_REGULARIZER, delta: float = ADAPTIVE_DELTA,
              gradient: np.ndarray = None) -> np.ndarray:
    """
    Momentum natural gradient.

    The block metric is low-pass filtered (``M = (1 - eps) M + eps g``), the
    natural direction ``(M + lam I)^-1 grad f`` is normalized by its own
    bias-corrected second moment and fed to ``momentum_step`` with
    coefficient ``beta1``.
    """
    gradient = oracle.gradient(state.theta) if gradient is None else gradient
    block = oracle.qfim(state.theta, Approximation.BLOCK_DIAGONAL).matrix
    state.metric = block if state.metric is None else (1.0 - eps) * state.metric + eps * block
    direction = metric_solve(state.metric, gradient, lam)
    t = state.iteration + 1
    state.m2 = (np.zeros_like(direction) if state.m2 is None else state.m2)
    state.m2 = beta2 * state.m2 + (1.0 - beta2) * direction ** 2
    scaled = direction / (np.sqrt(state.m2 / (1.0 - beta2 ** t)) + delta)
    return momentum_step(state, scaled, beta1, alpha)
