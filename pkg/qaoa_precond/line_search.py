"""Backtracking line search with Armijo and curvature tests."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from qaoa_precond.errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineSearchConfig:
    """
    Parameters of the backtracking search.

    ``either_condition`` selects the acceptance rule: ``False`` requires
    both the Armijo and the curvature condition, ``True`` accepts a step as
    soon as one of them holds (Armijo is tested first).  With
    ``persistent_step`` the optimizer starts the next search from the last
    accepted step instead of ``alpha0``.
    """

    alpha0: float = 1.0
    beta_reduce: float = 0.8
    c1: float = 1e-4
    c2: float = 0.9
    max_backtracks: int = 20
    either_condition: bool = False
    persistent_step: bool = False

    def __post_init__(self):
        if not (self.alpha0 > 0 and math.isfinite(self.alpha0)):
            raise ConfigError(f"alpha0 must be positive, got {self.alpha0}")
        if not 0 < self.beta_reduce < 1:
            raise ConfigError(f"beta_reduce must be in (0, 1), got {self.beta_reduce}")
        if not self.c1 > 0:
            raise ConfigError(f"c1 must be positive, got {self.c1}")
        if not 0 < self.c2 <= 1:
            raise ConfigError(f"c2 must be in (0, 1], got {self.c2}")
        if self.max_backtracks < 1:
            raise ConfigError(f"max_backtracks must be positive, got {self.max_backtracks}")
        if self.c1 >= self.c2:
            logger.debug("line search with c1=%g >= c2=%g", self.c1, self.c2)


@dataclass(frozen=True)
class LineSearchResult:
    step: float
    f_new: float
    backtracks: int
    exhausted: bool = False
    # gradient at the accepted point when the curvature test computed it
    gradient: Optional[np.ndarray] = None


def armijo(f_new: float, f0: float, step: float, slope: float, c1: float) -> bool:
    return f_new <= f0 + c1 * step * slope


def curvature(slope_new: float, slope: float, c2: float) -> bool:
    return slope_new >= c2 * slope


def line_search(oracle, theta: np.ndarray, direction: np.ndarray, cfg: LineSearchConfig,
                f0: float = None, g0: np.ndarray = None, alpha0: float = None) -> LineSearchResult:
    """
    Try ``alpha = alpha0 * beta_reduce**k`` for ``k = 0..max_backtracks``.

    Parameters
    ----------
    oracle
        Object with ``expectation(theta)`` and ``gradient(theta)``.
    theta, direction : np.ndarray
        Current point and search direction.
    cfg : LineSearchConfig
    f0, g0
        Objective and gradient at ``theta``; evaluated when not given.
    alpha0
        Overrides ``cfg.alpha0`` (persistent step sizes).

    Returns
    -------
    LineSearchResult
        The first accepted step, or the last tried step with
        ``exhausted=True``.

    Raises
    ------
    NumericalError
        The objective is not finite at a trial point.
    """
    direction = np.asarray(direction, dtype=float)
    if not np.all(np.isfinite(direction)) or not np.any(direction):
        raise NumericalError("line search direction must be finite and nonzero")
    f0 = oracle.expectation(theta) if f0 is None else f0
    g0 = oracle.gradient(theta) if g0 is None else g0
    slope = float(np.dot(g0, direction))
    start = cfg.alpha0 if alpha0 is None else alpha0

    for k in range(cfg.max_backtracks + 1):
        step = start * cfg.beta_reduce ** k
        trial = theta + step * direction
        f_new = oracle.expectation(trial)
        if not math.isfinite(f_new):
            raise NumericalError(f"non-finite objective {f_new} at step {step:g} of the line search")
        accepted_armijo = armijo(f_new, f0, step, slope, cfg.c1)
        if accepted_armijo and cfg.either_condition:
            return LineSearchResult(step, f_new, k)
        if accepted_armijo or cfg.either_condition:
            g_new = oracle.gradient(trial)
            if curvature(float(np.dot(g_new, direction)), slope, cfg.c2):
                return LineSearchResult(step, f_new, k, gradient=g_new)

    logger.debug("line search exhausted after %d backtracks, step %g", cfg.max_backtracks, step)
    return LineSearchResult(step, f_new, cfg.max_backtracks, exhausted=True)
