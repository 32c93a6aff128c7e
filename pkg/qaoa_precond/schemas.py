"""
Hyperparameter schemas for every optimizer.

Each method publishes its tunable hyperparameters as
``(low, high, default, scale)`` rows, the search space explored by the
Bayesian tuner, plus fixed options that are configurable but never tuned.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Tuple

from qaoa_precond.errors import ConfigError

QUASI_NEWTON = "quasi_newton"
NATURAL_GRADIENT = "natural_gradient"
STOCHASTIC = "stochastic"

# Iteration caps per family for benchmark sweeps
_family_iteration_cap = {QUASI_NEWTON: 60, NATURAL_GRADIENT: 60, STOCHASTIC: 400}


@dataclass(frozen=True)
class HyperParameter:
    name: str
    low: float
    high: float
    default: float
    scale: str = "linear"

    def __post_init__(self):
        if not self.low < self.high:
            raise ConfigError(f"{self.name}: low must be below high")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"{self.name}: unknown scale {self.scale!r}")
        if self.scale == "log" and self.low <= 0:
            raise ConfigError(f"{self.name}: log scale needs positive bounds")


@dataclass(frozen=True)
class MethodSchema:
    method: str
    family: str
    description: str
    tunables: Tuple[HyperParameter, ...]
    options: Mapping[str, Any] = field(default_factory=dict)

    @property
    def tunable_names(self):
        return tuple(h.name for h in self.tunables)

    def defaults(self) -> Dict[str, Any]:
        values = {h.name: h.default for h in self.tunables}
        values.update(self.options)
        return values

    @property
    def iteration_cap(self) -> int:
        return _family_iteration_cap[self.family]


def _line_search(alpha, beta, c1, c2, c1_high=5.0):
    return (HyperParameter("alpha", 1e-5, 0.99, alpha, "log"),
            HyperParameter("beta", 0.8, 0.9, beta),
            HyperParameter("c1", 1e-5, c1_high, c1, "log"),
            HyperParameter("c2", 0.1, 1.0, c2))


_LINE_SEARCH_OPTIONS = {"max_backtracks": 20, "either_condition": False, "persistent_step": False}
_METRIC_OPTIONS = {"regularizer": 1e-6}


def _adaptive(alpha, eps, beta1, beta2, eps_high):
    return (HyperParameter("alpha", 1e-5, 0.99, alpha, "log"),
            HyperParameter("eps", 1e-5, eps_high, eps, "log"),
            HyperParameter("beta1", 1e-5, 0.99, beta1, "log"),
            HyperParameter("beta2", 1e-5, 0.99, beta2, "log"))


_SPSA_TUNABLES = (
    HyperParameter("alpha", 0.1, 1.0, 0.602),
    HyperParameter("a_init", 1e-3, 1.0, 0.1, "log"),
    HyperParameter("c_init", 1e-3, 0.5, 0.1, "log"),
    HyperParameter("gamma", 0.01, 1.0, 0.101),
    HyperParameter("A", 0.0, 100.0, 10.0),
)

#------------------------------------------------------------------------
# Method id -> schema
#------------------------------------------------------------------------
_method_schema_map: Dict[str, MethodSchema] = {schema.method: schema for schema in (
    MethodSchema("bfgs", QUASI_NEWTON, "Broyden-Fletcher-Goldfarb-Shanno inverse update",
                 _line_search(0.70, 0.8, 1e-4, 1.0), dict(_LINE_SEARCH_OPTIONS)),
    MethodSchema("dfp", QUASI_NEWTON, "Davidon-Fletcher-Powell inverse update",
                 _line_search(0.37, 0.89, 0.0017, 1.0), dict(_LINE_SEARCH_OPTIONS)),
    MethodSchema("sr1", QUASI_NEWTON, "Symmetric rank-one inverse update",
                 _line_search(0.48, 0.83, 1e-5, 1.0),
                 dict(_LINE_SEARCH_OPTIONS, skip_threshold=1e-8)),
    MethodSchema("ncg", QUASI_NEWTON, "Scaled Perry nonlinear conjugate gradient",
                 _line_search(0.99, 0.83, 0.34, 0.59),
                 dict(_LINE_SEARCH_OPTIONS, scale=1.0)),
    MethodSchema("sp_bfgs", QUASI_NEWTON, "Secant-penalized BFGS",
                 _line_search(0.049, 0.82, 1.67e-5, 1.0, c1_high=1.0) + (
                     HyperParameter("N0", 1e-5, 1.0, 1e-5, "log"),
                     HyperParameter("Ns", 1e-5, 1.0, 1e-5, "log")),
                 dict(_LINE_SEARCH_OPTIONS, either_condition=True, coefficient="gamma")),
    MethodSchema("qng_block", NATURAL_GRADIENT, "Quantum natural gradient, block-diagonal metric",
                 (HyperParameter("alpha", 1e-5, 0.99, 0.0016, "log"),),
                 dict(_METRIC_OPTIONS, momentum=0.0)),
    MethodSchema("qng_diag", NATURAL_GRADIENT, "Quantum natural gradient, diagonal metric",
                 (HyperParameter("alpha", 1e-5, 0.99, 0.0026, "log"),),
                 dict(_METRIC_OPTIONS, momentum=0.0)),
    MethodSchema("qbroyden", NATURAL_GRADIENT, "Natural gradient with Broyden-filtered inverse metric",
                 (HyperParameter("alpha", 1e-5, 0.99, 0.0088, "log"),
                  HyperParameter("eps", 1e-5, 0.99, 0.0003, "log")),
                 dict(_METRIC_OPTIONS)),
    MethodSchema("qbang", NATURAL_GRADIENT, "Broyden-filtered natural gradient with adaptive moments",
                 _adaptive(0.14, 5.06e-5, 0.0078, 0.0001, 0.98),
                 dict(_METRIC_OPTIONS, delta=1e-8)),
    MethodSchema("mqng", NATURAL_GRADIENT, "Momentum natural gradient with low-pass metric",
                 _adaptive(0.14, 5.06e-5, 0.0078, 0.0001, 0.99),
                 dict(_METRIC_OPTIONS, delta=1e-8)),
    MethodSchema("spsa", STOCHASTIC, "Simultaneous perturbation stochastic approximation",
                 _SPSA_TUNABLES),
    MethodSchema("2spsa", STOCHASTIC, "Second-order SPSA with averaged Hessian samples",
                 _SPSA_TUNABLES + (
                     HyperParameter("aH_init", 0.1, 10.0, 1.0, "log"),
                     HyperParameter("cH_init", 1e-3, 0.5, 0.1, "log")),
                 {"resamplings": 1, "eigen_floor": 1e-4}),
    MethodSchema("qnspsa", STOCHASTIC, "Quantum natural SPSA with fidelity metric samples",
                 (HyperParameter("alpha", 1e-4, 0.5, 0.01, "log"),
                  HyperParameter("eps", 1e-3, 0.5, 0.01, "log")),
                 {"gamma": 0.101, "regularization": 1e-3, "eigen_floor": 1e-4}),
    MethodSchema("rcd", STOCHASTIC, "Random coordinate descent",
                 (HyperParameter("alpha", 1e-3, 1.0, 0.1, "log"),
                  HyperParameter("gamma", 0.0, 1.0, 0.101))),
)}

METHOD_IDS = tuple(_method_schema_map)


def get_schema(method: str) -> MethodSchema:
    try:
        return _method_schema_map[method]
    except KeyError:
        raise ConfigError(f"unknown method {method!r}; valid ids: {', '.join(METHOD_IDS)}") from None


def resolve_hyper(method: str, overrides: Mapping[str, Any] = None,
                  require_complete: bool = False) -> Dict[str, Any]:
    """
    Merge ``overrides`` into the schema defaults of ``method``.

    Raises
    ------
    ConfigError
        Unknown method, unknown key, non-numeric tunable or, with
        ``require_complete``, a tunable missing from ``overrides``.
    """
    schema = get_schema(method)
    overrides = dict(overrides or {})
    allowed = set(schema.tunable_names) | set(schema.options)
    for key in overrides:
        if key not in allowed:
            raise ConfigError(f"unknown hyperparameter {key!r} for method {method!r}; "
                              f"expected {sorted(allowed)}")
    if require_complete:
        for name in schema.tunable_names:
            if name not in overrides:
                raise ConfigError(f"missing hyperparameter {name!r} for method {method!r}")
    hyper = schema.defaults()
    hyper.update(overrides)
    for name in schema.tunable_names:
        value = hyper[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"hyperparameter {name!r} for method {method!r} must be a finite number, "
                              f"got {value!r}")
        hyper[name] = float(value)
    return hyper


def schema_table(method: str) -> Dict[str, Any]:
    """Search space and defaults of ``method`` as plain data (for YAML output)."""
    schema = get_schema(method)
    return {
        "method": schema.method,
        "family": schema.family,
        "search_space": {h.name: {"low": h.low, "high": h.high, "scale": h.scale}
                         for h in schema.tunables},
        "defaults": {h.name: h.default for h in schema.tunables},
        "options": dict(schema.options),
    }
