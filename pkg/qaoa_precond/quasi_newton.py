"""
Inverse-Hessian updates and the conjugate-gradient direction.

Every update takes the current inverse approximation ``B`` with the step
``s = theta_new - theta`` and gradient change ``y = g_new - g`` and returns
a new symmetric matrix.  A degenerate denominator raises ``UpdateSkipped``;
the caller keeps ``B``.
"""

import logging
from dataclasses import dataclass

import numpy as np

from qaoa_precond.errors import ConfigError, UpdateSkipped
from qaoa_precond.state import OptimizerState

logger = logging.getLogger(__name__)

CURVATURE_FLOOR = 1e-12
SR1_SKIP_THRESHOLD = 1e-8


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def _curvature(s: np.ndarray, y: np.ndarray, method: str) -> float:
    sy = float(s @ y)
    if sy <= CURVATURE_FLOOR * np.linalg.norm(s) * np.linalg.norm(y):
        raise UpdateSkipped(method, f"s'y = {sy:.3e} below curvature floor")
    return sy


#------------------------------------------------------------------------
# Rank-two and rank-one updates
#------------------------------------------------------------------------
def update_dfp(B: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    sy = _curvature(s, y, "dfp")
    By = B @ y
    yBy = float(y @ By)
    if abs(yBy) <= CURVATURE_FLOOR * float(y @ y):
        raise UpdateSkipped("dfp", f"y'By = {yBy:.3e} below floor")
    return symmetrize(B + np.outer(s, s) / sy - np.outer(By, By) / yBy)


def update_bfgs(B: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``(I - rho s y') B (I - rho y s') + rho s s'`` with ``rho = 1 / s'y``."""
    rho = 1.0 / _curvature(s, y, "bfgs")
    left = np.eye(B.shape[0]) - rho * np.outer(s, y)
    return symmetrize(left @ B @ left.T + rho * np.outer(s, s))


def update_sr1(B: np.ndarray, s: np.ndarray, y: np.ndarray, r: float = SR1_SKIP_THRESHOLD) -> np.ndarray:
    """Symmetric rank-one update; the result may be indefinite."""
    u = s - B @ y
    denom = float(u @ y)
    if abs(denom) <= r * np.linalg.norm(u) * np.linalg.norm(y) or not np.any(u):
        raise UpdateSkipped("sr1", f"|u'y| = {abs(denom):.3e} below threshold")
    return symmetrize(B + np.outer(u, u) / denom)


#------------------------------------------------------------------------
# Secant-penalized BFGS
#------------------------------------------------------------------------
@dataclass(frozen=True)
class SecantPenaltyConfig:
    N0: float = 0.0
    Ns: float = 1.0

    def __post_init__(self):
        if self.N0 < 0 or self.Ns < 0:
            raise ConfigError(f"N0 and Ns must be non-negative, got {self.N0}, {self.Ns}")


def secant_penalty(s: np.ndarray, pen: SecantPenaltyConfig) -> float:
    """``max(Ns * ||s|| - N0, 0)``; zero means a plain gradient step."""
    return max(pen.Ns * float(np.linalg.norm(s)) - pen.N0, 0.0)


def update_sp_bfgs_beta(B: np.ndarray, s: np.ndarray, y: np.ndarray, beta: float,
                        coefficient: str = "gamma") -> np.ndarray:
    """
    Secant-penalized update for an explicit penalty ``beta``.

    With ``gamma = 1/(s'y + 1/beta)`` and ``omega = 1/(s'y + 2/beta)``::

        B' = (I - omega s y') B (I - omega y s') + omega [gamma/omega + (c - omega) y'By] s s'

    where ``c`` is ``gamma`` (default) or ``omega`` (``coefficient="omega"``).
    ``beta -> inf`` gives the BFGS update and ``beta = 0`` leaves ``B``
    unchanged.
    """
    if coefficient not in ("gamma", "omega"):
        raise ConfigError(f"coefficient must be 'gamma' or 'omega', got {coefficient!r}")
    if beta == 0.0:
        return B.copy()
    sy = float(s @ y)
    denominators = (sy + 1.0 / beta, sy + 2.0 / beta)
    if not all(np.isfinite(d) and d != 0.0 for d in denominators):
        raise UpdateSkipped("sp_bfgs", f"non-finite coefficients at s'y = {sy:.3e}, beta = {beta:.3e}")
    gamma, omega = 1.0 / denominators[0], 1.0 / denominators[1]
    c = gamma if coefficient == "gamma" else omega
    yBy = float(y @ B @ y)
    left = np.eye(B.shape[0]) - omega * np.outer(s, y)
    rank_one = (gamma + omega * (c - omega) * yBy) * np.outer(s, s)
    return symmetrize(left @ B @ left.T + rank_one)


def update_sp_bfgs(B: np.ndarray, s: np.ndarray, y: np.ndarray, pen: SecantPenaltyConfig,
                   coefficient: str = "gamma") -> np.ndarray:
    return update_sp_bfgs_beta(B, s, y, secant_penalty(s, pen), coefficient)


#------------------------------------------------------------------------
# Nonlinear conjugate gradient
#------------------------------------------------------------------------
def ncg_beta(g: np.ndarray, y: np.ndarray, s: np.ndarray, prev_direction: np.ndarray,
             scale: float) -> float:
    """
    Scaled Perry coefficient ``(y'g - s'g / scale) / (y'd_prev)``.

    ``scale = 1`` is Perry's rule; a large ``scale`` tends to
    Hestenes-Stiefel.  Raises ``ZeroDivisionError`` on a zero denominator.
    """
    denom = float(y @ prev_direction)
    if denom == 0.0 or not np.isfinite(denom):
        raise ZeroDivisionError("y'd_prev vanished")
    return (float(y @ g) - float(s @ g) / scale) / denom


def ncg_step(state: OptimizerState, gradient: np.ndarray, scale: float = 1.0,
             reset_period: int = None) -> np.ndarray:
    """
    Conjugate direction for the current iterate.

    Falls back to ``-gradient`` on the first iteration, every
    ``reset_period`` iterations, on a zero denominator and whenever the
    conjugate direction is not a descent direction.
    """
    steepest = -gradient
    if (state.prev_direction is None or state.prev_gradient is None or state.prev_step is None
            or (reset_period and state.iteration % reset_period == 0)):
        return steepest
    y = gradient - state.prev_gradient
    try:
        beta = ncg_beta(gradient, y, state.prev_step, state.prev_direction, scale)
    except ZeroDivisionError:
        logger.debug("ncg reset at iteration %d: zero denominator", state.iteration)
        return steepest
    direction = steepest + beta * state.prev_direction
    if float(direction @ gradient) >= 0.0:
        logger.debug("ncg reset at iteration %d: non-descent direction", state.iteration)
        return steepest
    return direction
