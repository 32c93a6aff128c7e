"""
Simultaneous-perturbation methods and random coordinate descent.

Gain sequences follow Spall::

    a_k = a_init / (A + k + 1) ** alpha_decay
    c_k = c_init / (k + 1) ** gamma_decay

Perturbations are Rademacher vectors drawn from the optimizer stream, so
``1 / Delta == Delta`` elementwise.

qcalls per step: SPSA 2, 2SPSA 2 + 2 * resamplings, QNSPSA 6 (two objective
evaluations and four fidelities), RCD 2.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from qaoa_precond.errors import ConfigError
from qaoa_precond.quasi_newton import symmetrize
from qaoa_precond.state import OptimizerState

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-4


@dataclass(frozen=True)
class SPSAConfig:
    a_init: float = 0.1
    c_init: float = 0.1
    A: float = 0.0
    alpha_decay: float = 0.602
    gamma_decay: float = 0.101
    # second-order stream (2SPSA only)
    aH_init: Optional[float] = None
    cH_init: Optional[float] = None
    resamplings: int = 1
    eigen_floor: float = EIGEN_FLOOR

    def __post_init__(self):
        gains = {"a_init": self.a_init, "c_init": self.c_init}
        if self.aH_init is not None:
            gains.update(aH_init=self.aH_init, cH_init=self.cH_init)
        for name, value in gains.items():
            if value is None or not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.A < 0:
            raise ConfigError(f"A must be non-negative, got {self.A}")
        for name in ("alpha_decay", "gamma_decay"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in (0, 1], got {getattr(self, name)}")
        if self.resamplings < 1:
            raise ConfigError(f"resamplings must be positive, got {self.resamplings}")

    def gains(self, k: int):
        return (self.a_init / (self.A + k + 1) ** self.alpha_decay,
                self.c_init / (k + 1) ** self.gamma_decay)

    def hessian_gains(self, k: int):
        return min(1.0, self.aH_init / (k + 1)), self.cH_init / (k + 1) ** self.gamma_decay


def rademacher(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.choice(np.array([-1.0, 1.0]), size=dim)


def spsa_gradient(oracle, theta: np.ndarray, c: float, delta: np.ndarray):
    """Two-point estimate; returns ``(g_hat, f_plus, f_minus)``."""
    f_plus = oracle.expectation(theta + c * delta)
    f_minus = oracle.expectation(theta - c * delta)
    return (f_plus - f_minus) / (2.0 * c) * delta, f_plus, f_minus


def floored_solve(matrix: np.ndarray, rhs: np.ndarray, floor: float, lam: float = 0.0) -> np.ndarray:
    """Solve with the eigenvalues of ``matrix`` replaced by ``max(|lambda|, floor) + lam``."""
    values, vectors = np.linalg.eigh(symmetrize(matrix))
    values = np.maximum(np.abs(values), floor) + lam
    return vectors @ ((vectors.T @ rhs) / values)


#------------------------------------------------------------------------
# SPSA
#------------------------------------------------------------------------
def spsa_step(oracle, theta: np.ndarray, k: int, cfg: SPSAConfig, rng: np.random.Generator) -> np.ndarray:
    if k < 0:
        raise ConfigError(f"iteration index must be non-negative, got {k}")
    a_k, c_k = cfg.gains(k)
    g_hat, _, _ = spsa_gradient(oracle, theta, c_k, rademacher(rng, theta.size))
    return theta - a_k * g_hat


#------------------------------------------------------------------------
# 2SPSA
#------------------------------------------------------------------------
def hessian_sample(oracle, theta: np.ndarray, c: float, c_tilde: float, delta: np.ndarray,
                   f_plus: float, f_minus: float, rng: np.random.Generator) -> np.ndarray:
    """
    Rank-one symmetric Hessian sample reusing the gradient points ``theta +- c delta``.

    ``dG = [f(+ c D + c~ D~) - f(+ c D)] - [f(- c D + c~ D~) - f(- c D)]`` and
    the sample is ``dG / (2 c c~) * sym(D~ D')``.
    """
    delta_tilde = rademacher(rng, theta.size)
    f_plus_tilde = oracle.expectation(theta + c * delta + c_tilde * delta_tilde)
    f_minus_tilde = oracle.expectation(theta - c * delta + c_tilde * delta_tilde)
    d_g = (f_plus_tilde - f_plus) - (f_minus_tilde - f_minus)
    return d_g / (2.0 * c * c_tilde) * symmetrize(np.outer(delta_tilde, delta))


def spsa2_step(state: OptimizerState, oracle, k: int, cfg: SPSAConfig,
               rng: np.random.Generator) -> np.ndarray:
    """
    Second-order SPSA.

    The step at iteration ``k`` preconditions with the Hessian average of
    iterations ``< k`` (the identity before the first sample); the average
    then absorbs this iteration's samples with weight
    ``min(1, aH_init / (k + 1))``.
    """
    if cfg.aH_init is None:
        raise ConfigError("2SPSA needs aH_init and cH_init")
    theta = state.theta
    a_k, c_k = cfg.gains(k)
    w_k, c_tilde = cfg.hessian_gains(k)
    delta = rademacher(rng, theta.size)
    g_hat, f_plus, f_minus = spsa_gradient(oracle, theta, c_k, delta)

    previous = np.eye(theta.size) if state.metric is None else state.metric
    theta_new = theta - a_k * floored_solve(previous, g_hat, cfg.eigen_floor)

    sample = np.mean([hessian_sample(oracle, theta, c_k, c_tilde, delta, f_plus, f_minus, rng)
                      for _ in range(cfg.resamplings)], axis=0)
    state.metric = symmetrize((1.0 - w_k) * previous + w_k * sample)
    return theta_new


#------------------------------------------------------------------------
# QNSPSA
#------------------------------------------------------------------------
@dataclass(frozen=True)
class QNSPSAConfig:
    alpha: float = 0.01
    eps: float = 0.01
    gamma_decay: float = 0.101
    regularization: float = 1e-3
    eigen_floor: float = EIGEN_FLOOR

    def __post_init__(self):
        if not (self.alpha > 0 and self.eps > 0):
            raise ConfigError(f"alpha and eps must be positive, got {self.alpha}, {self.eps}")
        if not 0 <= self.gamma_decay <= 1:
            raise ConfigError(f"gamma_decay must be in [0, 1], got {self.gamma_decay}")


def qnspsa_metric_sample(oracle, theta: np.ndarray, c: float, rng: np.random.Generator) -> np.ndarray:
    """
    Fubini-Study estimate from four fidelities.

    For ``F(x) = |<psi(theta)|psi(theta + x)>|^2 ~ 1 - x' g x`` the
    combination ``F(c D1 + c D2) - F(c D1) - F(-c D1 + c D2) + F(-c D1)``
    equals ``-4 c^2 D1' g D2``.
    """
    d1 = rademacher(rng, theta.size)
    d2 = rademacher(rng, theta.size)
    d_f = (oracle.fidelity(theta, theta + c * d1 + c * d2)
           - oracle.fidelity(theta, theta + c * d1)
           - oracle.fidelity(theta, theta - c * d1 + c * d2)
           + oracle.fidelity(theta, theta - c * d1))
    return -d_f / (4.0 * c * c) * symmetrize(np.outer(d1, d2))


def qnspsa_step(state: OptimizerState, oracle, k: int, cfg: QNSPSAConfig,
                rng: np.random.Generator) -> np.ndarray:
    theta = state.theta
    c_k = cfg.eps / (k + 1) ** cfg.gamma_decay
    g_hat, _, _ = spsa_gradient(oracle, theta, c_k, rademacher(rng, theta.size))
    sample = qnspsa_metric_sample(oracle, theta, c_k, rng)
    if state.metric is None:
        state.metric = sample
    else:
        state.metric = symmetrize((k * state.metric + sample) / (k + 1))
    return theta - cfg.alpha * floored_solve(state.metric, g_hat, cfg.eigen_floor, cfg.regularization)


#------------------------------------------------------------------------
# Random coordinate descent
#------------------------------------------------------------------------
def rcd_step(oracle, theta: np.ndarray, k: int, alpha: float, gamma_decay: float,
             rng: np.random.Generator) -> np.ndarray:
    """Move one uniformly drawn coordinate along its partial derivative."""
    j = int(rng.integers(theta.size))
    theta_new = theta.copy()
    theta_new[j] -= alpha / (k + 1) ** gamma_decay * oracle.partial_derivative(theta, j)
    return theta_new
