"""Mutable per-run optimizer state."""

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np


class HistoryEntry(NamedTuple):
    theta: np.ndarray
    f: float
    qcalls: int


@dataclass
class OptimizerState:
    """
    Everything a method carries from one iteration to the next.

    Only the fields a method uses are populated; the rest stay ``None``.
    ``B`` is the inverse-curvature approximation for quasi-Newton methods
    and the inverse metric for the Broyden-filtered natural-gradient
    methods.  ``history`` holds one ``HistoryEntry`` per completed
    iteration, so its length always equals ``iteration``.
    """

    theta: np.ndarray
    iteration: int = 0
    B: Optional[np.ndarray] = None
    velocity: Optional[np.ndarray] = None
    m1: Optional[np.ndarray] = None
    m2: Optional[np.ndarray] = None
    # objective and gradient at theta, when the method evaluates them
    f_value: Optional[float] = None
    gradient: Optional[np.ndarray] = None
    # previous iterate (conjugate gradient)
    prev_gradient: Optional[np.ndarray] = None
    prev_direction: Optional[np.ndarray] = None
    prev_step: Optional[np.ndarray] = None
    # carried line-search step (persistent_step) or learning rate
    step_size: Optional[float] = None
    # low-pass metric (m-QNG), averaged curvature samples (2SPSA, QNSPSA)
    metric: Optional[np.ndarray] = None
    skipped_updates: int = 0
    history: List[HistoryEntry] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.theta.size)
