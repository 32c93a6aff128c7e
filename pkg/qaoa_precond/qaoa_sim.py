"""
Statevector simulation of the depth-p QAOA MaxCut ansatz.

The state for parameters ``theta = (gamma_1..gamma_p, beta_1..beta_p)`` is::

    |theta> = U_B(beta_p) U_P(gamma_p) ... U_B(beta_1) U_P(gamma_1) |+>^n

with ``U_P(gamma) = diag(exp(-i gamma E_k))`` over the cost diagonal ``E``
and ``U_B(beta) = prod_i exp(-i beta X_i)`` (the mixer angle is not halved).
Basis index bit ``i`` is vertex ``i``; vertex 0 is the least-significant bit.

Cost model (qcalls charged to the owning ``Evaluator``)
-------------------------------------------------------
==========================  =====================================
expectation                 1
gradient                    4p (2 per component: +shift and -shift batches)
partial_derivative          2
qfim full                   p(2p+1)  (upper triangle of the 2p x 2p tensor)
qfim block_diagonal         3p       (a 2x2 upper triangle per layer)
qfim diagonal               2p
fidelity                    1
sample_bitstrings           1
==========================  =====================================
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from qaoa_precond import problems
from qaoa_precond.errors import NumericalError, ProblemError

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-12
# Shift of a single-gate angle in the gate-decomposed parameter-shift rule
GATE_SHIFT = np.pi / 4


class Approximation(str, Enum):
    FULL = "full"
    BLOCK_DIAGONAL = "block_diagonal"
    DIAGONAL = "diagonal"


#------------------------------------------------------------------------
# Domain types
#------------------------------------------------------------------------
@dataclass(frozen=True)
class AnsatzConfig:
    n_qubits: int
    p: int = 1
    shots: Optional[int] = None

    def __post_init__(self):
        if self.n_qubits < 1 or self.p < 1:
            raise ProblemError(f"ansatz needs n_qubits >= 1 and p >= 1, got {self.n_qubits}, {self.p}")
        if self.n_qubits > problems.MAX_VERTICES:
            raise ProblemError(f"at most {problems.MAX_VERTICES} qubits are simulated")
        if self.shots is not None and self.shots < 1:
            raise ProblemError(f"shots must be >= 1 in sampled mode, got {self.shots}")

    @property
    def shot_mode(self) -> str:
        return "exact" if self.shots is None else "sampled"

    @property
    def n_params(self) -> int:
        return 2 * self.p


@dataclass(frozen=True)
class ParameterVector:
    gammas: Tuple[float, ...]
    betas: Tuple[float, ...]

    def __post_init__(self):
        if len(self.gammas) != len(self.betas):
            raise ProblemError("gammas and betas must have the same length")
        if not np.all(np.isfinite(self.as_array())):
            raise NumericalError("parameter vector has non-finite entries")

    @property
    def p(self) -> int:
        return len(self.gammas)

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.gammas, float), np.asarray(self.betas, float)])

    @classmethod
    def from_array(cls, theta: Sequence[float]) -> "ParameterVector":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size % 2:
            raise ProblemError(f"flat parameters must have even length, got shape {theta.shape}")
        p = theta.size // 2
        return cls(tuple(theta[:p]), tuple(theta[p:]))


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128)
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class MetricTensor:
    matrix: np.ndarray
    approximation: Approximation = Approximation.FULL

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "approximation", Approximation(self.approximation))

    @property
    def qfim(self) -> np.ndarray:
        """Quantum Fisher information, four times the Fubini-Study metric."""
        return 4.0 * self.matrix


def cost_diagonal(g: problems.WeightedGraph) -> np.ndarray:
    """Energy of every basis state; entry ``k`` equals ``cut_value`` of assignment ``k``."""
    energies = problems.basis_energies(g, np.arange(1 << g.n_vertices, dtype=np.int64))
    energies.setflags(write=False)
    return energies


#------------------------------------------------------------------------
# Gate kernels (in place on a flat amplitude array)
#------------------------------------------------------------------------
def _qubit_view(psi: np.ndarray, n: int, qubit: int) -> np.ndarray:
    # axis 1 of the view is the bit of ``qubit``
    return psi.reshape(1 << (n - 1 - qubit), 2, 1 << qubit)


def apply_mixer(psi: np.ndarray, n: int, beta: float) -> np.ndarray:
    c, s = np.cos(beta), -1j * np.sin(beta)
    for qubit in range(n):
        view = _qubit_view(psi, n, qubit)
        zero, one = view[:, 0, :].copy(), view[:, 1, :].copy()
        view[:, 0, :] = c * zero + s * one
        view[:, 1, :] = s * zero + c * one
    return psi


def apply_single_x_rotation(psi: np.ndarray, n: int, qubit: int, angle: float) -> np.ndarray:
    view = _qubit_view(psi, n, qubit)
    zero, one = view[:, 0, :].copy(), view[:, 1, :].copy()
    c, s = np.cos(angle), -1j * np.sin(angle)
    view[:, 0, :] = c * zero + s * one
    view[:, 1, :] = s * zero + c * one
    return psi


def mixer_generator(psi: np.ndarray, n: int) -> np.ndarray:
    """Return ``(sum_i X_i) psi`` as a new array."""
    out = np.zeros_like(psi)
    for qubit in range(n):
        out_view = _qubit_view(out, n, qubit)
        out_view += _qubit_view(psi, n, qubit)[:, ::-1, :]
    return out


def zz_diagonal(n: int, u: int, v: int) -> np.ndarray:
    k = np.arange(1 << n, dtype=np.int64)
    return 1.0 - 2.0 * (((k >> u) ^ (k >> v)) & 1)


def uniform_state(n: int) -> np.ndarray:
    return np.full(1 << n, 2.0 ** (-n / 2.0), dtype=np.complex128)


def _check_theta(theta, cfg: AnsatzConfig) -> np.ndarray:
    if isinstance(theta, ParameterVector):
        theta = theta.as_array()
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (cfg.n_params,):
        raise ProblemError(f"expected {cfg.n_params} parameters, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise NumericalError(f"non-finite parameters {theta}")
    return theta


def prepare_state(g: problems.WeightedGraph, cfg: AnsatzConfig, theta) -> StateVector:
    """Build ``|theta>``; see the module docstring for the conventions."""
    if cfg.n_qubits != g.n_vertices:
        raise ProblemError(f"ansatz has {cfg.n_qubits} qubits but graph has {g.n_vertices} vertices")
    theta = _check_theta(theta, cfg)
    return StateVector(_layered_state(cost_diagonal(g), cfg.n_qubits, cfg.p, theta))


def _layered_state(energies: np.ndarray, n: int, p: int, theta: np.ndarray) -> np.ndarray:
    psi = uniform_state(n)
    for layer in range(p):
        psi *= np.exp(-1j * theta[layer] * energies)
        apply_mixer(psi, n, theta[p + layer])
    return psi


def fubini_study_metric(psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
    """
    Real part of ``<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>``.

    ``dpsi`` holds one derivative state per row.
    """
    dpsi = np.atleast_2d(dpsi)
    overlaps = dpsi.conj() @ dpsi.T
    berry = dpsi.conj() @ psi
    metric = np.real(overlaps - np.outer(berry, berry.conj()))
    return 0.5 * (metric + metric.T)


def sample_from_state(probabilities: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts per basis index."""
    probs = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
    return rng.multinomial(shots, probs / probs.sum())


#------------------------------------------------------------------------
# Evaluator
#------------------------------------------------------------------------
@dataclass
class Evaluator:
    """
    Objective, gradient and metric oracle for one QAOA instance.

    A run owns its evaluator: ``qcalls`` and the shot stream are mutated by
    every charged call.
    """

    graph: problems.WeightedGraph
    config: AnsatzConfig
    rng: np.random.Generator = None
    qcalls: int = 0
    energies: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.config.n_qubits != self.graph.n_vertices:
            raise ProblemError(
                f"ansatz has {self.config.n_qubits} qubits but graph has {self.graph.n_vertices} vertices")
        if self.rng is None:
            self.rng = np.random.Generator(np.random.PCG64(0))
        self.energies = cost_diagonal(self.graph)

    @property
    def n(self) -> int:
        return self.config.n_qubits

    @property
    def p(self) -> int:
        return self.config.p

    @property
    def n_params(self) -> int:
        return self.config.n_params

    def _charge(self, calls: int):
        self.qcalls += int(calls)

    #--------------------------------------------------------------------
    # States
    #--------------------------------------------------------------------
    def state(self, theta) -> np.ndarray:
        return _layered_state(self.energies, self.n, self.p, _check_theta(theta, self.config))

    def derivative_states(self, theta) -> Tuple[np.ndarray, np.ndarray]:
        """
        ``(psi, dpsi)`` with row ``j`` of ``dpsi`` equal to ``d psi / d theta_j``.

        Each derivative inserts ``-i`` times the layer generator right after
        its gate (the generator commutes with the gate) and propagates through
        the remaining layers.
        """
        theta = _check_theta(theta, self.config)
        n, p, energies = self.n, self.p, self.energies
        dpsi = np.empty((2 * p, 1 << n), dtype=np.complex128)
        psi = uniform_state(n)
        for layer in range(p):
            psi *= np.exp(-1j * theta[layer] * energies)
            dpsi[layer] = self._propagate(-1j * energies * psi, theta, layer, after_cost=True)
            apply_mixer(psi, n, theta[p + layer])
            dpsi[p + layer] = self._propagate(-1j * mixer_generator(psi, n), theta, layer, after_cost=False)
        return psi, dpsi

    def _propagate(self, chi: np.ndarray, theta: np.ndarray, layer: int, after_cost: bool) -> np.ndarray:
        n, p = self.n, self.p
        if after_cost:
            apply_mixer(chi, n, theta[p + layer])
        for later in range(layer + 1, p):
            chi *= np.exp(-1j * theta[later] * self.energies)
            apply_mixer(chi, n, theta[p + later])
        return chi

    #--------------------------------------------------------------------
    # Expectations
    #--------------------------------------------------------------------
    def _measure(self, psi: np.ndarray) -> float:
        probs = np.abs(psi) ** 2
        if self.config.shots is None:
            return float(probs @ self.energies)
        counts = sample_from_state(probs, self.config.shots, self.rng)
        return float(counts @ self.energies) / self.config.shots

    def expectation(self, theta, charge: bool = True) -> float:
        """Energy of ``|theta>``, exact or averaged over ``shots`` samples."""
        value = self._measure(self.state(theta))
        if charge:
            self._charge(1)
        return value

    def exact_expectation(self, theta) -> float:
        """Uncharged exact energy, used to record trajectories."""
        psi = self.state(theta)
        return float((np.abs(psi) ** 2) @ self.energies)

    def gradient(self, theta) -> np.ndarray:
        """
        Derivative of the energy with respect to every parameter.

        Exact mode evaluates ``2 Re <d_j psi|E|psi>``.  Sampled mode applies
        the parameter-shift rule gate by gate (every ZZ edge gate of a cost
        layer and every X gate of a mixer layer is shifted by +-pi/4) and
        measures each shifted circuit with ``shots`` samples.
        """
        theta = _check_theta(theta, self.config)
        if self.config.shots is None:
            psi, dpsi = self.derivative_states(theta)
            grad = 2.0 * np.real(dpsi.conj() @ (self.energies * psi))
        else:
            grad = np.array([self._shift_rule_component(theta, j) for j in range(self.n_params)])
        self._charge(2 * self.n_params)
        return grad

    def partial_derivative(self, theta, j: int) -> float:
        theta = _check_theta(theta, self.config)
        if not 0 <= j < self.n_params:
            raise ProblemError(f"coordinate {j} out of range for {self.n_params} parameters")
        if self.config.shots is None:
            psi, dpsi = self.derivative_states(theta)
            value = float(2.0 * np.real(np.vdot(dpsi[j], self.energies * psi)))
        else:
            value = self._shift_rule_component(theta, j)
        self._charge(2)
        return value

    def _shifted_state(self, theta: np.ndarray, j: int, term: int, delta: float) -> np.ndarray:
        n, p = self.n, self.p
        layer = j % p
        psi = uniform_state(n)
        for k in range(p):
            psi *= np.exp(-1j * theta[k] * self.energies)
            if k == layer and j < p:
                u, v, _ = self.graph.edges[term]
                psi *= np.exp(-1j * delta * zz_diagonal(n, u, v))
            apply_mixer(psi, n, theta[p + k])
            if k == layer and j >= p:
                apply_single_x_rotation(psi, n, term, delta)
        return psi

    def _shift_rule_component(self, theta: np.ndarray, j: int, measure=None) -> float:
        measure = measure or self._measure
        if j < self.p:
            # E = sum_e -w/2 (1 - Z_u Z_v); the constant is a global phase
            terms = [(e, 0.5 * w) for e, (_, _, w) in enumerate(self.graph.edges)]
        else:
            terms = [(q, 1.0) for q in range(self.n)]
        total = 0.0
        for term, coefficient in terms:
            plus = measure(self._shifted_state(theta, j, term, GATE_SHIFT))
            minus = measure(self._shifted_state(theta, j, term, -GATE_SHIFT))
            total += coefficient * (plus - minus)
        return total

    #--------------------------------------------------------------------
    # Metric, fidelity and sampling
    #--------------------------------------------------------------------
    def qfim(self, theta, approx=Approximation.FULL) -> MetricTensor:
        """Fubini-Study metric from exact derivative states, optionally truncated."""
        approx = Approximation(approx)
        psi, dpsi = self.derivative_states(theta)
        metric = fubini_study_metric(psi, dpsi)
        p = self.p
        if approx is Approximation.BLOCK_DIAGONAL:
            layer = np.arange(2 * p) % p
            metric = np.where(layer[:, None] == layer[None, :], metric, 0.0)
            self._charge(3 * p)
        elif approx is Approximation.DIAGONAL:
            metric = np.diag(np.diag(metric))
            self._charge(2 * p)
        else:
            self._charge(p * (2 * p + 1))
        return MetricTensor(metric, approx)

    def fidelity(self, theta, theta_other) -> float:
        """``|<psi(theta)|psi(theta_other)>|^2``."""
        theta = _check_theta(theta, self.config)
        theta_other = _check_theta(theta_other, self.config)
        self._charge(1)
        if np.array_equal(theta, theta_other):
            return 1.0
        overlap = np.vdot(self.state(theta), self.state(theta_other))
        return float(min(1.0, abs(overlap) ** 2))

    def sample_bitstrings(self, theta, shots: int, rng: np.random.Generator = None) -> Counter:
        """Seeded multinomial draw of measurement outcomes as a multiset of cuts."""
        if shots < 1:
            raise ProblemError(f"shots must be positive, got {shots}")
        counts = sample_from_state(np.abs(self.state(theta)) ** 2, shots, rng or self.rng)
        self._charge(1)
        return Counter({problems.CutAssignment.from_index(int(k), self.n): int(c)
                        for k, c in enumerate(counts) if c})


def modal_assignment(samples: Counter) -> problems.CutAssignment:
    """Most frequent outcome; ties go to the smallest bit string."""
    top = max(samples.values())
    return min(a for a, c in samples.items() if c == top)
