"""
Bayesian hyperparameter search.

A Gaussian-process surrogate with a Matérn kernel models the tuning
objective over the unit cube.  Each sweep after the random warm-up
proposes one point per acquisition function (lower confidence bound,
expected improvement, probability of improvement) and picks among them
with hedge weights.

Constants
---------
N_INIT            random points before the surrogate is used
N_CANDIDATES      uniform candidates per acquisition
N_LOCAL           Gaussian perturbations of the incumbent
LOCAL_SCALE       standard deviation of those perturbations (unit cube)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.spatial.distance import cdist
from scipy.stats import norm

from qaoa_precond import bench
from qaoa_precond import rng as rng_streams
from qaoa_precond.errors import ConfigError, InsufficientDataError, NumericalError, QAOAPrecondError
from qaoa_precond.optimizers import StopRule
from qaoa_precond.problems import brute_force
from qaoa_precond.records import append_jsonl, read_jsonl
from qaoa_precond.schemas import get_schema

logger = logging.getLogger(__name__)

N_INIT = 10
N_CANDIDATES = 512
N_LOCAL = 64
LOCAL_SCALE = 0.05
KAPPA = 1.96
XI = 0.01
HEDGE_ETA = 1.0
PENALTY_MARGIN = 1.0
ACQUISITIONS = ("lcb", "ei", "pi")

# jitter added to the kernel diagonal, relative to its mean, until Cholesky succeeds
_JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4)

# log-space bounds for the marginal-likelihood fit (standardized targets)
_LENGTHSCALE_BOUNDS = (1e-2, 1e1)
_SIGNAL_BOUNDS = (1e-2, 1e2)
_NOISE_BOUNDS = (1e-10, 1e-1)
_FIT_STARTS = 5


#------------------------------------------------------------------------
# Search space
#------------------------------------------------------------------------
@dataclass(frozen=True)
class Dimension:
    name: str
    low: float
    high: float
    scale: str = "linear"

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ConfigError(f"{self.name}: bounds must be finite")
        if not self.low < self.high:
            raise ConfigError(f"{self.name}: lower bound {self.low} must be below upper bound {self.high}")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"{self.name}: unknown scale {self.scale!r}")
        if self.scale == "log" and self.low <= 0:
            raise ConfigError(f"{self.name}: log scale needs positive bounds")

    def to_unit(self, value: float) -> float:
        if self.scale == "log":
            return (math.log(value) - math.log(self.low)) / (math.log(self.high) - math.log(self.low))
        return (value - self.low) / (self.high - self.low)

    def from_unit(self, u: float) -> float:
        u = min(1.0, max(0.0, float(u)))
        if self.scale == "log":
            return math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        return self.low + u * (self.high - self.low)


@dataclass(frozen=True)
class SearchSpace:
    """Box of hyperparameters, mapped to ``[0, 1]^d`` (log dims in log space)."""

    dims: Tuple[Dimension, ...]

    def __post_init__(self):
        if not self.dims:
            raise ConfigError("search space has no dimensions")
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate dimension names in {names}")

    @classmethod
    def from_schema(cls, method: str, names: Sequence[str] = None) -> "SearchSpace":
        schema = get_schema(method)
        by_name = {h.name: h for h in schema.tunables}
        names = list(names) if names else list(by_name)
        unknown = [n for n in names if n not in by_name]
        if unknown:
            raise ConfigError(f"{method} has no tunable {unknown[0]!r}; expected {sorted(by_name)}")
        return cls(tuple(Dimension(n, by_name[n].low, by_name[n].high, by_name[n].scale) for n in names))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    @property
    def n_dims(self) -> int:
        return len(self.dims)

    def to_unit(self, values: Mapping[str, float]) -> np.ndarray:
        return np.array([d.to_unit(values[d.name]) for d in self.dims])

    def from_unit(self, x) -> Dict[str, float]:
        return {d.name: d.from_unit(u) for d, u in zip(self.dims, np.asarray(x, dtype=float))}


#------------------------------------------------------------------------
# Kernel and surrogate
#------------------------------------------------------------------------
def matern(x1: np.ndarray, x2: np.ndarray, lengthscales, signal_variance: float = 1.0,
           nu: float = 2.5) -> np.ndarray:
    """
    Matérn covariance between the rows of ``x1`` and ``x2``.

    ``r`` is the Euclidean distance after dividing each dim by its
    length-scale; ``nu`` must be 1/2, 3/2 or 5/2.
    """
    ls = np.asarray(lengthscales, dtype=float)
    r = cdist(np.atleast_2d(x1) / ls, np.atleast_2d(x2) / ls)
    if nu == 0.5:
        k = np.exp(-r)
    elif nu == 1.5:
        sr = math.sqrt(3.0) * r
        k = (1.0 + sr) * np.exp(-sr)
    elif nu == 2.5:
        sr = math.sqrt(5.0) * r
        k = (1.0 + sr + sr ** 2 / 3.0) * np.exp(-sr)
    else:
        raise ConfigError(f"Matérn smoothness must be 0.5, 1.5 or 2.5, got {nu}")
    return signal_variance * k


@dataclass
class GPModel:
    """
    Gaussian process over the unit cube with fixed kernel hyperparameters.

    ``X`` holds one observed point per row.  The factorization of
    ``K + noise_variance I`` is computed on construction; ``jitter`` records
    the diagonal shift that was needed for it.
    """

    X: np.ndarray
    y: np.ndarray
    lengthscales: np.ndarray
    signal_variance: float = 1.0
    noise_variance: float = 1e-6
    prior_mean: float = 0.0
    nu: float = 2.5
    jitter: float = field(default=0.0, init=False)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.y.size == 0:
            self.X = self.X.reshape(0, np.asarray(self.lengthscales).size)
        self.lengthscales = np.broadcast_to(np.asarray(self.lengthscales, dtype=float),
                                            (self.X.shape[1],)).copy()
        if self.X.shape[0] != self.y.size:
            raise ConfigError(f"{self.X.shape[0]} points but {self.y.size} observations")
        if self.noise_variance < 0 or self.signal_variance <= 0:
            raise ConfigError("kernel variances must be positive (noise may be zero)")
        self._factorize()

    @property
    def n_observations(self) -> int:
        return int(self.y.size)

    def kernel(self, a, b) -> np.ndarray:
        return matern(a, b, self.lengthscales, self.signal_variance, self.nu)

    def _factorize(self):
        self._L = None
        self._alpha = None
        if self.n_observations == 0:
            return
        K = self.kernel(self.X, self.X) + self.noise_variance * np.eye(self.n_observations)
        scale = float(np.mean(np.diag(K)))
        for jitter in _JITTER_LADDER:
            try:
                L = scipy.linalg.cholesky(K + jitter * scale * np.eye(self.n_observations), lower=True)
            except np.linalg.LinAlgError:
                continue
            if jitter:
                logger.debug("kernel matrix needed jitter %.1e to factorize", jitter * scale)
            self.jitter = jitter * scale
            self._L = L
            resid = self.y - self.prior_mean
            self._alpha = scipy.linalg.cho_solve((L, True), resid)
            return
        raise NumericalError(f"Cholesky factorization failed for {self.n_observations} observations "
                             f"after jitter up to {_JITTER_LADDER[-1] * scale:.1e}")

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at the rows of ``x``; variance clamped at 0."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        prior_var = np.full(x.shape[0], self.signal_variance)
        if self.n_observations == 0:
            return np.full(x.shape[0], self.prior_mean), prior_var
        k = self.kernel(self.X, x)
        mean = self.prior_mean + k.T @ self._alpha
        v = scipy.linalg.solve_triangular(self._L, k, lower=True)
        var = prior_var - np.sum(v ** 2, axis=0)
        negative = var < 0.0
        if np.any(negative):
            logger.debug("clamped %d negative posterior variances (min %.3e)", int(negative.sum()),
                         float(var.min()))
            var = np.where(negative, 0.0, var)
        return mean, var

    def log_marginal_likelihood(self) -> float:
        if self.n_observations == 0:
            return 0.0
        resid = self.y - self.prior_mean
        return float(-0.5 * resid @ self._alpha - np.log(np.diag(self._L)).sum()
                     - 0.5 * self.n_observations * math.log(2.0 * math.pi))

    def with_observation(self, x, y: float) -> "GPModel":
        return GPModel(np.vstack([self.X, np.atleast_2d(x)]), np.append(self.y, y), self.lengthscales,
                       self.signal_variance, self.noise_variance, self.prior_mean, self.nu)


def posterior(gp: GPModel, x) -> Tuple[float, float]:
    """
    Posterior mean and variance at one point.

    With no observations this is ``(prior_mean, signal_variance)``.
    """
    mean, var = gp.predict(np.asarray(x, dtype=float).reshape(1, -1))
    return float(mean[0]), float(var[0])


def fit_hyperparameters(X, y, nu: float = 2.5, rng: np.random.Generator = None,
                        n_starts: int = _FIT_STARTS) -> GPModel:
    """
    Maximize the marginal likelihood over length-scales and variances.

    Targets are standardized for the fit; the returned model carries the
    mean and scale back, so its posterior is in the units of ``y``.  The
    search is L-BFGS-B in log space from ``n_starts`` seeded starting points
    (the first is the center of the box).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    d = X.shape[1]
    if y.size == 0:
        return GPModel(X, y, np.full(d, 0.5), 1.0, 1e-6, 0.0, nu)
    rng = rng if rng is not None else rng_streams.stream(0, rng_streams.TUNER, "fit")
    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if not y_scale > 0:
        y_scale = 1.0
    z = (y - y_mean) / y_scale

    bounds = ([tuple(np.log(_LENGTHSCALE_BOUNDS))] * d
              + [tuple(np.log(_SIGNAL_BOUNDS)), tuple(np.log(_NOISE_BOUNDS))])
    low = np.array([b[0] for b in bounds])
    high = np.array([b[1] for b in bounds])

    def objective(params):
        try:
            model = GPModel(X, z, np.exp(params[:d]), math.exp(params[d]), math.exp(params[d + 1]), 0.0, nu)
        except NumericalError:
            return 1e25
        value = -model.log_marginal_likelihood()
        return value if math.isfinite(value) else 1e25

    starts = [0.5 * (low + high)] + [low + (high - low) * rng.random(low.size) for _ in range(n_starts - 1)]
    best = None
    for start in starts:
        result = scipy.optimize.minimize(objective, start, method="L-BFGS-B", bounds=bounds)
        if best is None or result.fun < best.fun:
            best = result
    params = best.x
    return GPModel(X, y, np.exp(params[:d]), math.exp(params[d]) * y_scale ** 2,
                   math.exp(params[d + 1]) * y_scale ** 2, y_mean, nu)


#------------------------------------------------------------------------
# Acquisition functions (all phrased for minimization)
#------------------------------------------------------------------------
def lower_confidence_bound(mean, var, kappa: float = KAPPA) -> np.ndarray:
    return np.asarray(mean) - kappa * np.sqrt(var)


def expected_improvement(mean, var, best: float, xi: float = XI) -> np.ndarray:
    """``E[max(best - xi - f, 0)]``; zero variance gives the plain improvement."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.asarray(var, dtype=float))
    improvement = best - xi - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, improvement / sigma, 0.0)
        ei = improvement * norm.cdf(z) + sigma * norm.pdf(z)
    return np.where(sigma > 0, np.maximum(ei, 0.0), np.maximum(improvement, 0.0))


def probability_of_improvement(mean, var, best: float, xi: float = XI) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.asarray(var, dtype=float))
    improvement = best - xi - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, improvement / sigma, 0.0)
    return np.where(sigma > 0, norm.cdf(z), (improvement > 0).astype(float))


def acquisition_values(name: str, gp: GPModel, candidates: np.ndarray, best: float,
                       kappa: float = KAPPA, xi: float = XI) -> np.ndarray:
    """Values to minimize over ``candidates`` for the named acquisition."""
    mean, var = gp.predict(candidates)
    if name == "lcb":
        return lower_confidence_bound(mean, var, kappa)
    if name == "ei":
        return -expected_improvement(mean, var, best, xi)
    if name == "pi":
        return -probability_of_improvement(mean, var, best, xi)
    raise ConfigError(f"unknown acquisition {name!r}; expected one of {ACQUISITIONS}")


@dataclass
class HedgeState:
    """Exponential-weights selection among the acquisition functions."""

    gains: np.ndarray = field(default_factory=lambda: np.zeros(len(ACQUISITIONS)))
    eta: float = HEDGE_ETA

    def probabilities(self) -> np.ndarray:
        logits = self.eta * (self.gains - np.max(self.gains))
        weights = np.exp(logits)
        return weights / weights.sum()

    def choose(self, rng: np.random.Generator) -> int:
        return int(rng.choice(len(ACQUISITIONS), p=self.probabilities()))

    def update(self, gp: GPModel, proposals: Mapping[str, np.ndarray]):
        """Reward each acquisition by minus the standardized posterior mean at its proposal."""
        if gp.n_observations == 0:
            return
        scale = float(np.std(gp.y)) or 1.0
        centre = float(np.mean(gp.y))
        for i, name in enumerate(ACQUISITIONS):
            mean, _ = posterior(gp, proposals[name])
            self.gains[i] -= (mean - centre) / scale


@dataclass
class Suggestion:
    x: np.ndarray
    acquisition: str
    proposals: Dict[str, np.ndarray]


def candidate_pool(gp: GPModel, n_dims: int, rng: np.random.Generator,
                   n_uniform: int = N_CANDIDATES, n_local: int = N_LOCAL,
                   scale: float = LOCAL_SCALE) -> np.ndarray:
    """Uniform points plus clipped Gaussian perturbations of the incumbent."""
    uniform = rng.random((n_uniform, n_dims))
    if gp.n_observations == 0 or n_local == 0:
        return uniform
    incumbent = gp.X[int(np.argmin(gp.y))]
    local = np.clip(incumbent + scale * rng.standard_normal((n_local, n_dims)), 0.0, 1.0)
    return np.vstack([uniform, local])


def acquire(gp: GPModel, space: SearchSpace, rng: np.random.Generator, hedge: HedgeState = None,
            candidates: np.ndarray = None) -> Suggestion:
    """
    Next point to evaluate.

    Every acquisition proposes the argmin of its values over the candidate
    pool (first index on ties); the hedge weights then pick one proposal.
    """
    hedge = hedge if hedge is not None else HedgeState()
    if candidates is None:
        candidates = candidate_pool(gp, space.n_dims, rng)
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    best = float(np.min(gp.y)) if gp.n_observations else gp.prior_mean
    proposals = {}
    for name in ACQUISITIONS:
        values = acquisition_values(name, gp, candidates, best)
        proposals[name] = candidates[int(np.argmin(values))].copy()
    chosen = ACQUISITIONS[hedge.choose(rng)]
    return Suggestion(proposals[chosen], chosen, proposals)


#------------------------------------------------------------------------
# Trial log
#------------------------------------------------------------------------
@dataclass
class TrialRecord:
    iteration: int
    x: List[float]
    params: Dict[str, float]
    y: float
    acquisition: str
    penalized: bool = False
    gains: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"iteration": self.iteration, "x": [float(u) for u in self.x],
                "params": {k: float(v) for k, v in self.params.items()}, "y": float(self.y),
                "acquisition": self.acquisition, "penalized": self.penalized,
                "gains": [float(g) for g in self.gains]}


class TrialLog:
    """
    Append-only sequence of trials, mirrored to a line-delimited file when
    ``path`` is given.
    """

    kind = "trial"

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.trials: List[TrialRecord] = []

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def __eq__(self, other):
        return isinstance(other, TrialLog) and self.trials == other.trials

    def append(self, trial: TrialRecord):
        expected = len(self.trials)
        if trial.iteration != expected:
            raise ValueError(f"trial iteration {trial.iteration} out of order, expected {expected}")
        self.trials.append(trial)
        if self.path is not None:
            append_jsonl(self.path, self.kind, trial.to_dict())

    @classmethod
    def load(cls, path) -> "TrialLog":
        log = cls()
        for row in read_jsonl(path, cls.kind):
            log.append(TrialRecord(**row))
        log.path = Path(path)
        return log

    def observations(self) -> Tuple[np.ndarray, np.ndarray]:
        if not self.trials:
            return np.empty((0, 0)), np.empty(0)
        return np.array([t.x for t in self.trials], dtype=float), np.array([t.y for t in self.trials])

    def best(self) -> TrialRecord:
        candidates = [t for t in self.trials if not t.penalized] or self.trials
        return min(candidates, key=lambda t: (t.y, t.iteration))

    def replay_model(self, seed: int, nu: float = 2.5) -> GPModel:
        """Surrogate exactly as it stood after the last logged trial."""
        X, y = self.observations()
        fit_rng = rng_streams.stream(seed, rng_streams.TUNER, len(self.trials) - 1, "fit")
        return fit_hyperparameters(X, y, nu, fit_rng)


#------------------------------------------------------------------------
# Optimization loop
#------------------------------------------------------------------------
@dataclass
class TuningResult:
    best_params: Dict[str, float]
    best_value: float
    log: TrialLog
    space: SearchSpace


def _penalty(values: Sequence[float]) -> float:
    """Worst finite value seen plus a margin proportional to the observed range."""
    if not values:
        return PENALTY_MARGIN
    worst, best = max(values), min(values)
    return worst + PENALTY_MARGIN * (1.0 + (worst - best))


def minimize_objective(objective: Callable[[Dict[str, float]], float], space: SearchSpace, budget: int,
                       seed: int, n_init: int = N_INIT, log: TrialLog = None, nu: float = 2.5) -> TuningResult:
    """
    Suggest, evaluate and observe for ``budget`` sweeps.

    The first ``n_init`` sweeps are uniform random; later ones come from
    ``acquire`` on a surrogate refit after every observation.  Each sweep
    draws from its own stream ``(seed, "tuner", iteration)``, so trials
    already present in ``log`` are taken as-is and the loop resumes where
    it stopped.  An objective that raises a package error or returns a
    non-finite value is observed as a penalty.
    """
    if n_init < 1:
        raise ConfigError(f"n_init must be positive, got {n_init}")
    if budget < n_init:
        raise InsufficientDataError(f"tuning budget {budget} is below the {n_init} random warm-up points")
    log = log if log is not None else TrialLog()
    if len(log) > budget:
        raise ConfigError(f"log already holds {len(log)} trials, more than the budget {budget}")

    hedge = HedgeState()
    if len(log):
        hedge.gains = np.array(log.trials[-1].gains or np.zeros(len(ACQUISITIONS)), dtype=float)
        logger.info("resuming tuning at sweep %d of %d", len(log), budget)
    finite = [t.y for t in log if not t.penalized]
    gp = log.replay_model(seed, nu) if len(log) else None

    for iteration in range(len(log), budget):
        sweep_rng = rng_streams.stream(seed, rng_streams.TUNER, iteration)
        if iteration < n_init:
            x = sweep_rng.random(space.n_dims)
            acquisition, proposals = "random", None
        else:
            suggestion = acquire(gp, space, sweep_rng, hedge)
            x, acquisition, proposals = suggestion.x, suggestion.acquisition, suggestion.proposals
        params = space.from_unit(x)
        try:
            y = float(objective(params))
        except QAOAPrecondError as exc:
            logger.warning("sweep %d failed: %s", iteration, exc)
            y = math.nan
        penalized = not math.isfinite(y)
        if penalized:
            y = _penalty(finite)
        else:
            finite.append(y)

        X, ys = log.observations()
        X = np.vstack([X, x]) if len(log) else np.atleast_2d(x)
        gp = fit_hyperparameters(X, np.append(ys, y), nu,
                                 rng_streams.stream(seed, rng_streams.TUNER, iteration, "fit"))
        if proposals is not None:
            hedge.update(gp, proposals)
        log.append(TrialRecord(iteration, [float(u) for u in x], params, y, acquisition, penalized,
                               [float(g) for g in hedge.gains]))
        logger.debug("sweep %d (%s): y=%.6g", iteration, acquisition, y)

    best = log.best()
    return TuningResult(dict(best.params), best.y, log, space)


def tune(method: str, graph, budget: int, seed: int, restarts: int = 20, names: Sequence[str] = None,
         p: int = 1, shots: Optional[int] = None, max_iterations: Optional[int] = None,
         stop_mode: str = "none", rho: float = 0.03, truth=None, fixed: Mapping[str, Any] = None,
         n_init: int = N_INIT, workers: int = 1, log: TrialLog = None, problem: str = "problem",
         nu: float = 2.5) -> TuningResult:
    """
    Tune the hyperparameters ``names`` of ``method`` on one MaxCut instance.

    The objective of a sweep point is the mean final objective over
    ``restarts`` runs.  The starting points are the same for every sweep
    point, and any failed run turns the sweep point into a penalty.
    ``stop_mode="relative"`` runs with the ``rho`` exit condition.
    """
    space = SearchSpace.from_schema(method, names)
    fixed = dict(fixed or {})
    if stop_mode == "relative" and truth is None:
        truth = brute_force(graph)
    cap = max_iterations if max_iterations is not None else get_schema(method).iteration_cap
    stop = StopRule(max_iterations=cap, tolerance_mode=stop_mode, rho=rho, reference=truth)

    def objective(params):
        hyper = dict(fixed)
        hyper.update(params)
        tasks = [bench.RunTask(problem, graph, method, hyper, restart, seed, p, shots, stop)
                 for restart in range(restarts)]
        records = bench.execute_tasks(tasks, workers)
        if any(r.failed for r in records):
            return math.nan
        return math.fsum(r.final_f for r in records) / len(records)

    return minimize_objective(objective, space, budget, seed, n_init, log, nu)
