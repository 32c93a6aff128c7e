"""
Experiment configuration.

Configurations are YAML files.  ``_parse_config`` turns values of keys
ending in ``_dir``, ``_path``, ``_file`` or ``_files`` into ``Path``
objects (and the string ``"None"`` into ``None``).  ``load_experiment``
validates every section before anything is computed; unknown keys are
rejected.

Example::

    problem:
      problem_file: data/problems/maxcut_3.txt
    ansatz:
      p: 1
      shots: None
    methods:
      bfgs: {}
      sp_bfgs:
        hyper_file: hyper/sp_bfgs.yml
    protocol:
      restarts: 20
      stop_modes: [none, relative]
    tuning:
      budget: 70
    output_dir: runs/maxcut_3
    seed: 0
    workers: 4
    verbose: 1
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from qaoa_precond import problems
from qaoa_precond.errors import ConfigError
from qaoa_precond.records import SCHEMA_VERSION
from qaoa_precond.schemas import resolve_hyper

logger = logging.getLogger(__name__)

_PATH_SUFFIXES = ("_dir", "_path", "_file", "_files")


def configure_logging(verbose: int = 0):
    """0 -> WARNING, 1 -> INFO, 2 or more -> DEBUG."""
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


def _parse_config(cfg: Dict[str, Any]) -> Dict[str, Any]:
    for key, val in cfg.items():
        if isinstance(val, dict):
            cfg[key] = _parse_config(val)
        elif isinstance(key, str) and key.endswith(_PATH_SUFFIXES):
            if val is None or val == "None":
                cfg[key] = None
            elif isinstance(val, list):
                cfg[key] = [Path(element) for element in val]
            else:
                cfg[key] = Path(val)
        elif val == "None":
            cfg[key] = None
    return cfg


def read_yaml(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        with path.open("r") as fp:
            cfg = yaml.safe_load(fp)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path} must hold a mapping at top level")
    return _parse_config(cfg)


def _plain_yaml(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _plain_yaml(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain_yaml(v) for v in value]
    return value


def write_yaml(data: Mapping[str, Any], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fp:
        yaml.safe_dump(_plain_yaml(dict(data)), fp, sort_keys=False, default_flow_style=False)
    return path


def _build(cls, section: str, data: Optional[Mapping[str, Any]]):
    data = dict(data or {})
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in section {section!r}; expected {sorted(allowed)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"section {section!r}: {exc}") from exc


#------------------------------------------------------------------------
# Sections
#------------------------------------------------------------------------
@dataclass(frozen=True)
class ProblemSpec:
    """A fixture file, or generation parameters."""

    problem_file: Optional[Path] = None
    n: Optional[int] = None
    seed: int = 0
    density: float = 1.0
    weight_range: Tuple[float, float] = (1.0, 1.0)
    name: Optional[str] = None

    def __post_init__(self):
        if (self.problem_file is None) == (self.n is None):
            raise ConfigError("problem needs exactly one of 'problem_file' or 'n'")
        if self.n is not None and not problems.MIN_VERTICES <= self.n <= problems.MAX_VERTICES:
            raise ConfigError(f"problem size n={self.n} outside [{problems.MIN_VERTICES}, {problems.MAX_VERTICES}]")
        if not 0.0 < self.density <= 1.0:
            raise ConfigError(f"density must be in (0, 1], got {self.density}")
        object.__setattr__(self, "weight_range", tuple(float(w) for w in self.weight_range))
        if len(self.weight_range) != 2:
            raise ConfigError(f"weight_range must have two entries, got {self.weight_range}")

    @property
    def key(self) -> str:
        if self.name:
            return self.name
        if self.problem_file is not None:
            return Path(self.problem_file).stem
        return f"maxcut_{self.n}_{self.seed}"

    def load(self) -> problems.WeightedGraph:
        if self.problem_file is not None:
            return problems.read_graph(self.problem_file)
        return problems.generate_problem(self.n, self.seed, self.density, self.weight_range)


@dataclass(frozen=True)
class AnsatzSpec:
    p: int = 1
    shots: Optional[int] = None

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError(f"p must be positive, got {self.p}")
        if self.shots is not None and self.shots < 1:
            raise ConfigError(f"shots must be positive or None, got {self.shots}")


@dataclass(frozen=True)
class ProtocolSpec:
    restarts: int = 20
    max_iterations: Optional[int] = None
    stop_modes: Tuple[str, ...] = ("none", "relative")
    rho: float = 0.03
    final_shots: int = 512
    gradient_floor: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "stop_modes", tuple(self.stop_modes))
        if self.restarts < 1:
            raise ConfigError(f"restarts must be positive, got {self.restarts}")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ConfigError(f"max_iterations must be non-negative, got {self.max_iterations}")
        for mode in self.stop_modes:
            if mode not in ("none", "relative"):
                raise ConfigError(f"unknown stop mode {mode!r}; expected 'none' or 'relative'")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.final_shots < 0:
            raise ConfigError(f"final_shots must be non-negative, got {self.final_shots}")


@dataclass(frozen=True)
class TuningSpec:
    budget: int = 70
    n_init: int = 10
    restarts: int = 20
    names: Optional[Tuple[str, ...]] = None
    stop_mode: str = "none"

    def __post_init__(self):
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
        if self.n_init < 1:
            raise ConfigError(f"n_init must be positive, got {self.n_init}")
        if self.stop_mode not in ("none", "relative"):
            raise ConfigError(f"unknown stop mode {self.stop_mode!r}")


def load_hyper_file(path) -> Dict[str, Any]:
    """
    Hyperparameters from a YAML file: either a flat mapping, or the output
    of ``tune`` (its ``best_hyper`` block).
    """
    data = read_yaml(path)
    if "best_hyper" in data:
        data = data["best_hyper"]
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of hyperparameters")
    return data


def _resolve_methods(methods) -> Dict[str, Dict[str, Any]]:
    if methods is None:
        return {}
    if isinstance(methods, (list, tuple)):
        methods = {m: {} for m in methods}
    if not isinstance(methods, dict):
        raise ConfigError("methods must be a list of ids or a mapping id -> overrides")
    resolved = {}
    for method, entry in methods.items():
        entry = dict(entry or {})
        hyper_file = entry.pop("hyper_file", None)
        overrides = load_hyper_file(hyper_file) if hyper_file is not None else {}
        overrides.update(entry)
        resolved[method] = resolve_hyper(method, overrides, require_complete=hyper_file is not None)
    return resolved


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    ansatz: AnsatzSpec = field(default_factory=AnsatzSpec)
    methods: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    tuning: TuningSpec = field(default_factory=TuningSpec)
    output_dir: Path = Path("runs")
    seed: int = 0
    workers: Optional[int] = None
    verbose: int = 0

    @classmethod
    def from_dict(cls, cfg: Mapping[str, Any]) -> "ExperimentConfig":
        cfg = dict(cfg)
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(cfg) - allowed)
        if unknown:
            raise ConfigError(f"unknown configuration key {unknown[0]!r}; expected {sorted(allowed)}")
        if "problem" not in cfg:
            raise ConfigError("missing configuration key 'problem'")
        workers = cfg.get("workers")
        if workers is not None and workers < 1:
            raise ConfigError(f"workers must be positive, got {workers}")
        return cls(
            problem=_build(ProblemSpec, "problem", cfg["problem"]),
            ansatz=_build(AnsatzSpec, "ansatz", cfg.get("ansatz")),
            methods=_resolve_methods(cfg.get("methods")),
            protocol=_build(ProtocolSpec, "protocol", cfg.get("protocol")),
            tuning=_build(TuningSpec, "tuning", cfg.get("tuning")),
            output_dir=Path(cfg.get("output_dir") or "runs"),
            seed=int(cfg.get("seed", 0)),
            workers=workers,
            verbose=int(cfg.get("verbose", 0)),
        )

    def effective(self) -> Dict[str, Any]:
        """Every value with defaults resolved, in YAML-ready form."""
        data = asdict(self)
        data["schema_version"] = SCHEMA_VERSION
        return _plain_yaml(data)


def load_experiment(path, overrides: Mapping[str, Any] = None) -> ExperimentConfig:
    """
    Read and validate an experiment file.

    ``overrides`` are merged one level deep (section by section) before
    validation, as the command line does for its flags.
    """
    cfg = read_yaml(path)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key] = dict(cfg[key], **value)
        else:
            cfg[key] = value
    return ExperimentConfig.from_dict(cfg)


#------------------------------------------------------------------------
# Provenance
#------------------------------------------------------------------------
def write_effective_config(config: ExperimentConfig, out_dir) -> Path:
    path = write_yaml(config.effective(), Path(out_dir) / "effective_config.yml")
    logger.info("effective configuration written to %s", path)
    return path


def write_manifest(out_dir, files: List[Path], command: str) -> Path:
    """``manifest.yml`` listing every produced file relative to ``out_dir``."""
    out_dir = Path(out_dir)
    entries = []
    for f in sorted({Path(f) for f in files}):
        try:
            rel = f.relative_to(out_dir)
        except ValueError:
            rel = f
        entries.append({"file": str(rel), "schema_version": SCHEMA_VERSION})
    return write_yaml({"schema_version": SCHEMA_VERSION, "command": command, "files": entries},
                      out_dir / "manifest.yml")
