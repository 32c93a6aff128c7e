"""
Optimizer suite behind one interface.

Every method consumes an oracle with the ``Evaluator`` surface
(``expectation``, ``gradient``, ``partial_derivative``, ``qfim``,
``fidelity``, ``exact_expectation`` and a ``qcalls`` counter).  ``run``
drives a method from a starting point to a ``RunRecord``.

Gradient-based methods keep the gradient at the current iterate in
``OptimizerState.gradient``; it is evaluated once at the start and then once
per iteration at the new iterate, so the recorded gradient norm always
belongs to the recorded point.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Optional

import numpy as np

from qaoa_precond import natural_gradient as ng
from qaoa_precond import quasi_newton as qn
from qaoa_precond import stochastic
from qaoa_precond.errors import ConfigError, NumericalError, UpdateSkipped
from qaoa_precond.line_search import LineSearchConfig, line_search
from qaoa_precond.problems import GroundTruth, distance_to_solution
from qaoa_precond.qaoa_sim import Approximation, MetricTensor, modal_assignment
from qaoa_precond.records import IterationRecord, RunRecord, SampleSummary, within_tolerance
from qaoa_precond.schemas import get_schema, resolve_hyper
from qaoa_precond.state import HistoryEntry, OptimizerState

logger = logging.getLogger(__name__)

DEFAULT_RHO = 0.03


#------------------------------------------------------------------------
# Classical oracle for test functions
#------------------------------------------------------------------------
@dataclass
class FunctionOracle:
    """
    Oracle over a plain function, charged with the same cost model as the
    QAOA evaluator.  ``metric`` defaults to the identity.
    """

    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] = None
    metric: Callable[[np.ndarray], np.ndarray] = None
    fidelity_fn: Callable[[np.ndarray, np.ndarray], float] = None
    qcalls: int = 0

    def expectation(self, theta, charge: bool = True) -> float:
        if charge:
            self.qcalls += 1
        return float(self.f(np.asarray(theta, dtype=float)))

    def exact_expectation(self, theta) -> float:
        return float(self.f(np.asarray(theta, dtype=float)))

    def gradient(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        self.qcalls += 2 * theta.size
        return np.asarray(self.grad(theta), dtype=float)

    def partial_derivative(self, theta, j: int) -> float:
        theta = np.asarray(theta, dtype=float)
        self.qcalls += 2
        return float(np.asarray(self.grad(theta))[j])

    def qfim(self, theta, approx=Approximation.FULL) -> MetricTensor:
        theta = np.asarray(theta, dtype=float)
        matrix = np.eye(theta.size) if self.metric is None else np.asarray(self.metric(theta), float)
        approx = Approximation(approx)
        if approx is Approximation.DIAGONAL:
            matrix = np.diag(np.diag(matrix))
        return MetricTensor(matrix, approx)

    def fidelity(self, theta, theta_other) -> float:
        if self.fidelity_fn is None:
            raise NotImplementedError("fidelity")
        self.qcalls += 1
        return float(self.fidelity_fn(np.asarray(theta, float), np.asarray(theta_other, float)))


#------------------------------------------------------------------------
# Stopping rule
#------------------------------------------------------------------------
@dataclass(frozen=True)
class StopRule:
    """
    ``tolerance_mode`` is ``"none"`` (run to ``max_iterations``) or
    ``"relative"`` (stop once ``|f - f*| <= rho |f*|``).  ``reference`` also
    decides the ``converged`` flag when the mode is ``"none"``.
    """

    max_iterations: int = 60
    tolerance_mode: str = "none"
    rho: float = DEFAULT_RHO
    reference: Optional[GroundTruth] = None
    gradient_floor: float = 0.0

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations must be non-negative, got {self.max_iterations}")
        if self.tolerance_mode not in ("none", "relative"):
            raise ConfigError(f"tolerance_mode must be 'none' or 'relative', got {self.tolerance_mode!r}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.tolerance_mode == "relative" and self.reference is None:
            raise ConfigError("relative tolerance needs a ground-truth reference")
        if self.gradient_floor < 0:
            raise ConfigError(f"gradient_floor must be non-negative, got {self.gradient_floor}")

    def reached(self, f: float) -> bool:
        return self.reference is not None and within_tolerance(f, self.reference.optimal_value, self.rho)


#------------------------------------------------------------------------
# Methods
#------------------------------------------------------------------------
class Optimizer:
    """Base class: ``initialize`` builds the state, ``step`` moves ``state.theta`` once."""

    method_id = ""
    uses_gradient = True
    learning_rate_key = "alpha"

    def __init__(self, hyper: Dict[str, Any], rng: np.random.Generator = None):
        self.hyper = hyper
        self.rng = rng if rng is not None else np.random.Generator(np.random.PCG64(0))

    def initialize(self, oracle, theta0: np.ndarray) -> OptimizerState:
        state = OptimizerState(theta=np.array(theta0, dtype=float))
        if self.uses_gradient:
            state.gradient = oracle.gradient(state.theta)
        return state

    def step(self, state: OptimizerState, oracle) -> Dict[str, Any]:
        raise NotImplementedError

    def gradient_norm(self, state: OptimizerState) -> Optional[float]:
        if state.gradient is None:
            return None
        return float(np.linalg.norm(state.gradient))

    @property
    def learning_rate(self) -> float:
        return float(self.hyper[self.learning_rate_key])

    def set_learning_rate(self, value: float):
        if not value > 0:
            raise ConfigError(f"learning rate must be positive, got {value}")
        self.hyper[self.learning_rate_key] = float(value)


class QuasiNewton(Optimizer):
    """Inverse-Hessian methods with a backtracking Armijo/curvature search."""

    def __init__(self, hyper, rng=None):
        super().__init__(hyper, rng)
        self.line_search = LineSearchConfig(
            alpha0=hyper["alpha"], beta_reduce=hyper["beta"], c1=hyper["c1"], c2=hyper["c2"],
            max_backtracks=int(hyper["max_backtracks"]), either_condition=bool(hyper["either_condition"]),
            persistent_step=bool(hyper["persistent_step"]))

    def set_learning_rate(self, value):
        super().set_learning_rate(value)
        self.line_search = replace(self.line_search, alpha0=float(value))

    def initialize(self, oracle, theta0):
        state = super().initialize(oracle, theta0)
        state.f_value = oracle.expectation(state.theta)
        state.B = np.eye(state.dim)
        return state

    def direction(self, state: OptimizerState) -> np.ndarray:
        direction = -state.B @ state.gradient
        if float(direction @ state.gradient) >= 0.0:
            logger.debug("%s: non-descent direction at iteration %d, using -g", self.method_id, state.iteration)
            direction = -state.gradient
        return direction

    def update(self, B, s, y):
        raise NotImplementedError

    def step(self, state, oracle):
        direction = self.direction(state)
        if not np.any(direction):
            # stationary point: nothing to search along
            return {"step": 0.0, "backtracks": 0, "exhausted": False}
        start = state.step_size if (self.line_search.persistent_step and state.step_size) else None
        result = line_search(oracle, state.theta, direction, self.line_search,
                             f0=state.f_value, g0=state.gradient, alpha0=start)
        theta_new = state.theta + result.step * direction
        g_new = result.gradient if result.gradient is not None else oracle.gradient(theta_new)
        s, y = theta_new - state.theta, g_new - state.gradient
        try:
            state.B = self.update(state.B, s, y)
        except UpdateSkipped as skip:
            state.skipped_updates += 1
            logger.debug("%s at iteration %d", skip, state.iteration)
        state.prev_gradient, state.prev_direction, state.prev_step = state.gradient, direction, s
        state.theta, state.gradient, state.f_value = theta_new, g_new, result.f_new
        if self.line_search.persistent_step:
            state.step_size = result.step
        return {"step": result.step, "backtracks": result.backtracks, "exhausted": result.exhausted}


class BFGS(QuasiNewton):
    method_id = "bfgs"

    def update(self, B, s, y):
        return qn.update_bfgs(B, s, y)


class DFP(QuasiNewton):
    method_id = "dfp"

    def update(self, B, s, y):
        return qn.update_dfp(B, s, y)


class SR1(QuasiNewton):
    method_id = "sr1"

    def update(self, B, s, y):
        return qn.update_sr1(B, s, y, self.hyper["skip_threshold"])


class SPBFGS(QuasiNewton):
    method_id = "sp_bfgs"

    def __init__(self, hyper, rng=None):
        super().__init__(hyper, rng)
        self.penalty = qn.SecantPenaltyConfig(N0=hyper["N0"], Ns=hyper["Ns"])
        self.coefficient = hyper["coefficient"]

    def update(self, B, s, y):
        return qn.update_sp_bfgs(B, s, y, self.penalty, self.coefficient)


class NCG(QuasiNewton):
    method_id = "ncg"

    def initialize(self, oracle, theta0):
        state = super().initialize(oracle, theta0)
        state.B = None
        return state

    def direction(self, state):
        # the stored gradient is at the current point; ncg_step compares with prev_gradient
        return qn.ncg_step(state, state.gradient, self.hyper["scale"], reset_period=state.dim)

    def update(self, B, s, y):
        return B


class QNG(Optimizer):
    approximation = Approximation.BLOCK_DIAGONAL

    def step(self, state, oracle):
        direction = ng.qng_direction(oracle, state.theta, self.approximation,
                                     self.hyper["regularizer"], state.gradient)
        state.theta = ng.momentum_step(state, direction, self.hyper["momentum"], self.hyper["alpha"])
        state.gradient = oracle.gradient(state.theta)
        return {}


class QNGBlock(QNG):
    method_id = "qng_block"


class QNGDiag(QNG):
    method_id = "qng_diag"
    approximation = Approximation.DIAGONAL


class QBroyden(Optimizer):
    method_id = "qbroyden"

    def step(self, state, oracle):
        h = self.hyper
        state.theta = ng.qbroyden_step(state, oracle, h["alpha"], h["eps"], h["regularizer"], state.gradient)
        state.gradient = oracle.gradient(state.theta)
        return {}


class QBang(Optimizer):
    method_id = "qbang"

    def step(self, state, oracle):
        h = self.hyper
        state.theta = ng.qbang_step(state, oracle, h["alpha"], h["eps"], h["beta1"], h["beta2"],
                                    h["regularizer"], h["delta"], state.gradient)
        state.gradient = oracle.gradient(state.theta)
        return {}


class MQNG(Optimizer):
    method_id = "mqng"

    def step(self, state, oracle):
        h = self.hyper
        state.theta = ng.mqng_step(state, oracle, h["alpha"], h["eps"], h["beta1"], h["beta2"],
                                   h["regularizer"], h["delta"], state.gradient)
        state.gradient = oracle.gradient(state.theta)
        return {}


class SPSA(Optimizer):
    method_id = "spsa"
    uses_gradient = False
    learning_rate_key = "a_init"

    def __init__(self, hyper, rng=None):
        super().__init__(hyper, rng)
        self.config = stochastic.SPSAConfig(
            a_init=hyper["a_init"], c_init=hyper["c_init"], A=hyper["A"],
            alpha_decay=hyper["alpha"], gamma_decay=hyper["gamma"],
            aH_init=hyper.get("aH_init"), cH_init=hyper.get("cH_init"),
            resamplings=int(hyper.get("resamplings", 1)), eigen_floor=hyper.get("eigen_floor", 1e-4))

    def set_learning_rate(self, value):
        super().set_learning_rate(value)
        self.config = replace(self.config, a_init=float(value))

    def step(self, state, oracle):
        state.theta = stochastic.spsa_step(oracle, state.theta, state.iteration, self.config, self.rng)
        return {}


class SPSA2(SPSA):
    method_id = "2spsa"

    def step(self, state, oracle):
        state.theta = stochastic.spsa2_step(state, oracle, state.iteration, self.config, self.rng)
        return {}


class QNSPSA(Optimizer):
    method_id = "qnspsa"
    uses_gradient = False

    def __init__(self, hyper, rng=None):
        super().__init__(hyper, rng)
        self.config = stochastic.QNSPSAConfig(
            alpha=hyper["alpha"], eps=hyper["eps"], gamma_decay=hyper["gamma"],
            regularization=hyper["regularization"], eigen_floor=hyper["eigen_floor"])

    def set_learning_rate(self, value):
        super().set_learning_rate(value)
        self.config = replace(self.config, alpha=float(value))

    def step(self, state, oracle):
        state.theta = stochastic.qnspsa_step(state, oracle, state.iteration, self.config, self.rng)
        return {}


class RCD(Optimizer):
    method_id = "rcd"
    uses_gradient = False

    def step(self, state, oracle):
        state.theta = stochastic.rcd_step(oracle, state.theta, state.iteration, self.hyper["alpha"],
                                          self.hyper["gamma"], self.rng)
        return {}


_optimizer_class_map = {cls.method_id: cls for cls in (
    BFGS, DFP, SR1, NCG, SPBFGS, QNGBlock, QNGDiag, QBroyden, QBang, MQNG, SPSA, SPSA2, QNSPSA, RCD)}


def make_optimizer(method: str, hyper: Dict[str, Any] = None, rng: np.random.Generator = None) -> Optimizer:
    get_schema(method)
    return _optimizer_class_map[method](resolve_hyper(method, hyper), rng)


#------------------------------------------------------------------------
# Driver
#------------------------------------------------------------------------
@dataclass
class OptimizationRun:
    """
    Step-wise driver around one optimizer.

    ``advance()`` performs one iteration and appends it to ``record``;
    ``done`` turns true once a stopping condition holds.  ``run`` and the BMI
    component both use it.
    """

    method: str
    oracle: Any
    theta0: np.ndarray
    hyper: Dict[str, Any] = None
    stop: StopRule = field(default_factory=StopRule)
    rng: np.random.Generator = None
    seed: int = 0
    restart: int = 0
    problem: str = ""

    def __post_init__(self):
        self.hyper = resolve_hyper(self.method, self.hyper)
        self.optimizer = make_optimizer(self.method, self.hyper, self.rng)
        self.theta0 = np.array(self.theta0, dtype=float)
        self.record = RunRecord(method=self.method, hyper=dict(self.hyper), seed=self.seed,
                                restart=self.restart, problem=self.problem,
                                theta0=[float(x) for x in self.theta0])
        self.state = None
        self.done = False
        self._qcalls0 = self.oracle.qcalls
        self._start = None
        try:
            self.record.f0 = self._checked(self.oracle.exact_expectation(self.theta0))
            self.record.best_f = self.record.f0
        except NumericalError as exc:
            self._fail(exc)
            return
        if self.stop.max_iterations == 0:
            self._finish("max_iterations")

    @property
    def qcalls(self) -> int:
        return self.oracle.qcalls - self._qcalls0

    def _checked(self, f: float) -> float:
        if not math.isfinite(f):
            raise NumericalError(f"non-finite objective {f}")
        return f

    def _fail(self, exc: Exception):
        self.record.failed = True
        self.record.reason = f"{type(exc).__name__}: {exc}"
        logger.warning("run failed: method=%s seed=%s restart=%s: %s",
                       self.method, self.seed, self.restart, self.record.reason)
        self._finish("failed")

    def _finish(self, reason: str):
        self.done = True
        self.record.stop_reason = reason
        if self.state is not None:
            self.record.skipped_updates = self.state.skipped_updates
        if self._start is not None:
            self.record.walltime = time.perf_counter() - self._start

    def _start_state(self):
        self._start = time.perf_counter()
        self.state = self.optimizer.initialize(self.oracle, self.theta0)
        norm = self.optimizer.gradient_norm(self.state)
        if norm is not None and norm < self.stop.gradient_floor:
            self._finish("gradient_floor")

    def advance(self) -> Optional[IterationRecord]:
        """One iteration; returns the new trajectory entry, or None once done."""
        if self.done:
            return None
        try:
            if self.state is None:
                self._start_state()
                if self.done:
                    return None
            info = self.optimizer.step(self.state, self.oracle)
            theta = self.state.theta
            if not np.all(np.isfinite(theta)):
                raise NumericalError(f"non-finite parameters at iteration {self.state.iteration + 1}")
            f = self._checked(self.oracle.exact_expectation(theta))
            self.state.iteration += 1
        except NumericalError as exc:
            self._fail(exc)
            return None
        self.state.history.append(HistoryEntry(theta.copy(), f, self.qcalls))
        entry = IterationRecord(iteration=self.state.iteration, theta=[float(x) for x in theta], f=f,
                                grad_norm=self.optimizer.gradient_norm(self.state), qcalls=self.qcalls,
                                wallclock=time.perf_counter() - self._start, info=info)
        self._observe(entry)
        return entry

    def _observe(self, entry: IterationRecord):
        record = self.record
        record.trajectory.append(entry)
        record.best_f = min(record.best_f, entry.f)
        if self.stop.reached(entry.f) and not record.converged:
            record.converged = True
            record.iterations_to_convergence = entry.iteration
        if self.stop.tolerance_mode == "relative" and record.converged:
            self._finish("tolerance")
        elif entry.grad_norm is not None and entry.grad_norm < self.stop.gradient_floor:
            self._finish("gradient_floor")
        elif entry.iteration >= self.stop.max_iterations:
            self._finish("max_iterations")

    def run_to_end(self) -> RunRecord:
        while not self.done:
            self.advance()
        return self.record

    def sample_final(self, shots: int, truth: GroundTruth = None, rng: np.random.Generator = None):
        """Measure the final state and store the modal bit string (not counted in the run's qcalls)."""
        theta = np.array(self.record.final_theta, dtype=float)
        if self.record.failed or not np.all(np.isfinite(theta)):
            return None
        samples = self.oracle.sample_bitstrings(theta, shots, rng)
        modal = modal_assignment(samples)
        hamming = None
        if truth is not None:
            hamming = distance_to_solution(modal, truth)
        self.record.final_sample = SampleSummary(modal.bits, samples[modal] / shots, hamming)
        return self.record.final_sample


def run(method: str, oracle, theta0, hyper: Dict[str, Any] = None, stop: StopRule = None,
        rng: np.random.Generator = None, seed: int = 0, restart: int = 0, problem: str = "",
        final_shots: int = 0, truth: GroundTruth = None) -> RunRecord:
    """
    Optimize from ``theta0`` until ``stop`` fires.

    Parameters
    ----------
    method : str
        One of ``schemas.METHOD_IDS``.
    oracle
        ``Evaluator`` or ``FunctionOracle``.
    theta0 : array_like
        Starting parameters.
    hyper : dict, optional
        Overrides of the schema defaults.
    stop : StopRule, optional
    rng : numpy.random.Generator, optional
        Optimizer stream (perturbations, coordinates).
    final_shots : int
        When positive, sample the final state and record the modal bit string.
    truth : GroundTruth, optional
        Used for the Hamming distance of the final sample.

    Returns
    -------
    RunRecord
        Never raises for numerical trouble; such runs are marked failed.
    """
    driver = OptimizationRun(method, oracle, theta0, hyper, stop or StopRule(), rng, seed, restart, problem)
    record = driver.run_to_end()
    if final_shots > 0:
        driver.sample_final(final_shots, truth if truth is not None else driver.stop.reference)
    return record
