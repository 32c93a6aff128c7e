"""
Benchmark harness and metrics.

``run_benchmark`` fans ``RunTask`` objects out over a process pool, keeps
the resulting run records in ``<out_dir>/<protocol>/runs.jsonl`` (so an
interrupted sweep resumes with only the missing runs) and folds them into
one ``BenchmarkReport`` per (problem, method, protocol).

Aggregation filters
-------------------
convergence_ratio            all runs; failed runs count as not converged
mean_final_f, mean_best_f,
mean_qcalls, mean_hamming,
mean_qcalls_per_iteration    runs that did not fail
*_to_convergence             converged runs only
lipschitz                    runs within 1 % of the optimum (see ``lipschitz_estimate``)

Timing fields are measured on a monotonic clock and are written to
separate timing tables; every other report file is a pure function of the
persisted run records.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import xarray as xr

from qaoa_precond import rng as rng_streams
from qaoa_precond.errors import ConfigError, InsufficientDataError
from qaoa_precond.optimizers import StopRule, run
from qaoa_precond.problems import GroundTruth, WeightedGraph, brute_force
from qaoa_precond.qaoa_sim import AnsatzConfig, Evaluator
from qaoa_precond.records import (SCHEMA_VERSION, RunRecord, append_jsonl, read_jsonl, read_records,
                                  within_tolerance, write_jsonl)
from qaoa_precond.schemas import get_schema

logger = logging.getLogger(__name__)

DEFAULT_RESTARTS = 20
DEFAULT_FINAL_SHOTS = 512
DEFAULT_RHO = 0.03
LIPSCHITZ_RHO = 0.01
LIPSCHITZ_MAX_ITERATIONS = 20
LIPSCHITZ_MIN_FRACTION = 0.5
STEP_FLOOR = 1e-12
LANDSCAPE_GRID = 300

STOP_MODES = ("none", "relative")
# directory names of the two protocols
_protocol_dir_map = {"none": "max_iterations", "relative": "tolerance"}

RUN_COLUMNS = ("problem", "method", "protocol", "restart", "seed", "iterations", "qcalls", "final_f",
               "best_f", "converged", "iterations_to_convergence", "qcalls_to_convergence",
               "skipped_updates", "stop_reason", "failed", "modal_bits", "hamming")
REPORT_COLUMNS = ("problem", "method", "protocol", "n_runs", "n_failed", "convergence_ratio",
                  "mean_final_f", "mean_best_f", "mean_qcalls", "mean_qcalls_per_iteration",
                  "mean_iterations_to_convergence", "mean_qcalls_to_convergence", "mean_hamming",
                  "lipschitz_average", "lipschitz_std", "lipschitz_median", "lipschitz_iqr")
TIMING_COLUMNS = ("problem", "method", "protocol", "mean_walltime", "mean_time_per_iteration",
                  "mean_time_to_convergence")
LIPSCHITZ_COLUMNS = ("problem", "method", "n_runs", "n_kept", "average", "std", "median", "iqr")


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else math.nan


#------------------------------------------------------------------------
# Convergence and Lipschitz statistics
#------------------------------------------------------------------------
def is_converged(record: RunRecord, truth: GroundTruth, rho: float = DEFAULT_RHO) -> bool:
    """True iff some iterate came within ``rho |f*|`` of the optimum."""
    return any(within_tolerance(it.f, truth.optimal_value, rho)
               for it in record.trajectory if math.isfinite(it.f))


def iteration_of_convergence(record: RunRecord, truth: GroundTruth, rho: float = DEFAULT_RHO) -> Optional[int]:
    for it in record.trajectory:
        if math.isfinite(it.f) and within_tolerance(it.f, truth.optimal_value, rho):
            return it.iteration
    return None


@dataclass(frozen=True)
class LipschitzStats:
    average: float
    std: float
    median: float
    iqr: float
    n_runs: int = 0
    n_samples: int = 0

    @classmethod
    def from_samples(cls, samples: Sequence[float], n_runs: int = 0) -> "LipschitzStats":
        """
        Population standard deviation; quartiles by linear interpolation
        between order statistics.
        """
        values = np.sort(np.asarray(samples, dtype=float))
        if values.size == 0:
            raise InsufficientDataError("no Lipschitz samples")
        average = math.fsum(values) / values.size
        std = math.sqrt(math.fsum((values - average) ** 2) / values.size)
        q1, median, q3 = np.percentile(values, [25.0, 50.0, 75.0], method="linear")
        return cls(average, std, float(median), float(q3 - q1), n_runs, int(values.size))


def step_ratios(record: RunRecord) -> List[float]:
    """``|f_{k+1} - f_k| / ||theta_{k+1} - theta_k||`` along the trajectory, starting at theta0."""
    thetas = record.thetas()
    fs = np.concatenate([[record.f0], record.f_values()])
    ratios = []
    for k in range(len(fs) - 1):
        dist = float(np.linalg.norm(thetas[k + 1] - thetas[k]))
        if dist < STEP_FLOOR or not (math.isfinite(fs[k]) and math.isfinite(fs[k + 1])):
            continue
        ratios.append(abs(fs[k + 1] - fs[k]) / dist)
    return ratios


def run_lipschitz(record: RunRecord) -> Optional[float]:
    ratios = step_ratios(record)
    return max(ratios) if ratios else None


def lipschitz_estimate(records: Sequence[RunRecord], truth: GroundTruth = None, rho: float = LIPSCHITZ_RHO,
                       pooled: bool = False) -> LipschitzStats:
    """
    Local Lipschitz statistics over the runs that reached ``rho``.

    With ``truth`` the filter is ``is_converged(record, truth, rho)``,
    otherwise the stored ``converged`` flag.  Per run the estimate is the
    largest consecutive-iterate ratio; ``pooled=True`` instead pools every
    ratio of every kept run.

    Raises
    ------
    InsufficientDataError
        Fewer than half of the runs pass the filter, or no usable steps.
    """
    records = list(records)
    if not records:
        raise InsufficientDataError("no runs to estimate a Lipschitz constant from")
    kept = [r for r in records if not r.failed
            and (is_converged(r, truth, rho) if truth is not None else r.converged)]
    if len(kept) < LIPSCHITZ_MIN_FRACTION * len(records):
        raise InsufficientDataError(
            f"only {len(kept)} of {len(records)} runs reached the {rho:.0%} tolerance; "
            f"at least {LIPSCHITZ_MIN_FRACTION:.0%} are required")
    if pooled:
        samples = [x for r in kept for x in step_ratios(r)]
    else:
        samples = [v for v in (run_lipschitz(r) for r in kept) if v is not None]
    return LipschitzStats.from_samples(samples, n_runs=len(kept))


#------------------------------------------------------------------------
# Landscape
#------------------------------------------------------------------------
def landscape_directions(dim: int, seed: int) -> np.ndarray:
    """Two seeded unit vectors, one per row."""
    draws = rng_streams.stream(seed, rng_streams.LANDSCAPE, dim).standard_normal((2, dim))
    return draws / np.linalg.norm(draws, axis=1, keepdims=True)


def landscape_scan(graph: WeightedGraph, cfg: AnsatzConfig, center, directions=None,
                   grid: int = LANDSCAPE_GRID, extent: float = 1.0, seed: int = 0) -> xr.DataArray:
    """
    Exact objective on ``center + a d1 + b d2`` for ``a, b`` in ``[-extent, extent]``.

    Grid coordinates are ``numpy.linspace(-extent, extent, grid)``, so a
    single-point grid sits at the corner ``(-extent, -extent)``.
    """
    if grid < 1:
        raise ConfigError(f"grid must be positive, got {grid}")
    evaluator = Evaluator(graph, AnsatzConfig(cfg.n_qubits, cfg.p, None))
    center = np.asarray(center, dtype=float)
    if directions is None:
        directions = landscape_directions(center.size, seed)
    d1, d2 = (np.asarray(d, dtype=float) for d in directions)
    coords = np.linspace(-extent, extent, grid)
    values = np.empty((grid, grid))
    for i, a in enumerate(coords):
        for j, b in enumerate(coords):
            values[i, j] = evaluator.exact_expectation(center + a * d1 + b * d2)
    return xr.DataArray(values, dims=("a", "b"), coords={"a": coords, "b": coords}, name="f",
                        attrs={"center": center.tolist(), "d1": d1.tolist(), "d2": d2.tolist(),
                               "schema_version": SCHEMA_VERSION})


def write_landscape_text(landscape: xr.DataArray, path) -> Path:
    """Plain grid: one row per ``a``, one column per ``b``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (f"schema_version {SCHEMA_VERSION}\n"
              f"rows a, columns b, linspace({landscape['a'].values[0]:g}, {landscape['a'].values[-1]:g}, "
              f"{landscape.sizes['a']})")
    np.savetxt(path, landscape.values, fmt="%.17g", header=header)
    return path


def write_landscape_netcdf(landscape: xr.DataArray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    landscape.to_netcdf(path, engine="netcdf4")
    return path


#------------------------------------------------------------------------
# Runs
#------------------------------------------------------------------------
def initial_theta(seed: int, problem: str, restart: int, p: int) -> np.ndarray:
    """Uniform start in ``[-pi, pi]^{2p}``; shared by every method for a given restart."""
    return rng_streams.stream(seed, rng_streams.INITIAL, problem, restart).uniform(-math.pi, math.pi, 2 * p)


@dataclass(frozen=True)
class RunTask:
    """One optimization run, self-contained so it can be shipped to a worker process."""

    problem: str
    graph: WeightedGraph
    method: str
    hyper: Mapping[str, Any]
    restart: int
    seed: int
    p: int = 1
    shots: Optional[int] = None
    stop: StopRule = field(default_factory=StopRule)
    final_shots: int = 0
    truth: Optional[GroundTruth] = None

    @property
    def key(self):
        return (self.problem, self.method, self.restart, self.seed)

    def execute(self) -> RunRecord:
        evaluator = Evaluator(self.graph, AnsatzConfig(self.graph.n_vertices, self.p, self.shots),
                              rng=rng_streams.stream(self.seed, rng_streams.SHOTS, self.problem, self.method,
                                                     self.restart))
        return run(self.method, evaluator, initial_theta(self.seed, self.problem, self.restart, self.p),
                   dict(self.hyper), self.stop,
                   rng=rng_streams.stream(self.seed, rng_streams.OPTIMIZER, self.problem, self.method,
                                          self.restart),
                   seed=self.seed, restart=self.restart, problem=self.problem,
                   final_shots=self.final_shots, truth=self.truth)


def _execute(task: RunTask) -> RunRecord:
    return task.execute()


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def execute_tasks(tasks: Sequence[RunTask], workers: int = 1) -> List[RunRecord]:
    """Run every task; the result is sorted by run key whatever the worker count."""
    tasks = list(tasks)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(tasks) <= 1:
        records = [task.execute() for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            records = list(pool.map(_execute, tasks))
    return sorted(records, key=lambda r: r.key)


#------------------------------------------------------------------------
# Reports
#------------------------------------------------------------------------
@dataclass
class BenchmarkReport:
    problem: str
    method: str
    protocol: str
    n_runs: int
    n_failed: int
    convergence_ratio: float
    mean_final_f: float
    mean_best_f: float
    mean_qcalls: float
    mean_qcalls_per_iteration: float
    mean_iterations_to_convergence: float
    mean_qcalls_to_convergence: float
    mean_hamming: float
    lipschitz: Optional[LipschitzStats] = None
    timing: Dict[str, float] = field(default_factory=dict, compare=False)

    def row(self) -> Dict[str, Any]:
        data = {k: v for k, v in asdict(self).items() if k not in ("lipschitz", "timing")}
        for name in ("average", "std", "median", "iqr"):
            data[f"lipschitz_{name}"] = getattr(self.lipschitz, name) if self.lipschitz else math.nan
        return {column: data[column] for column in REPORT_COLUMNS}

    def timing_row(self) -> Dict[str, Any]:
        data = {"problem": self.problem, "method": self.method, "protocol": self.protocol}
        data.update(self.timing)
        return {column: data.get(column, math.nan) for column in TIMING_COLUMNS}

    def metric(self, name: str) -> float:
        if name in self.timing:
            return self.timing[name]
        if name.startswith("lipschitz_"):
            return getattr(self.lipschitz, name[len("lipschitz_"):]) if self.lipschitz else math.nan
        return float(getattr(self, name))


def _qcalls_at(record: RunRecord, iteration: int) -> int:
    return record.trajectory[iteration - 1].qcalls


def build_report(problem: str, method: str, protocol: str, records: Sequence[RunRecord],
                 truth: GroundTruth, rho: float = DEFAULT_RHO) -> BenchmarkReport:
    """Fold run records into one report; independent of the order of ``records``."""
    records = sorted(records, key=lambda r: r.key)
    ok = [r for r in records if not r.failed]
    converged = [(r, iteration_of_convergence(r, truth, rho)) for r in ok]
    converged = [(r, k) for r, k in converged if k is not None]
    try:
        lipschitz = lipschitz_estimate(ok, truth, LIPSCHITZ_RHO) if ok else None
    except InsufficientDataError as exc:
        logger.debug("%s/%s/%s: no Lipschitz statistics: %s", problem, method, protocol, exc)
        lipschitz = None
    report = BenchmarkReport(
        problem=problem, method=method, protocol=protocol,
        n_runs=len(records), n_failed=len(records) - len(ok),
        convergence_ratio=len(converged) / len(records) if records else 0.0,
        mean_final_f=_mean(r.final_f for r in ok),
        mean_best_f=_mean(r.best_f for r in ok),
        mean_qcalls=_mean(r.qcalls for r in ok),
        mean_qcalls_per_iteration=_mean(r.qcalls / r.iterations for r in ok if r.iterations),
        mean_iterations_to_convergence=_mean(k for _, k in converged),
        mean_qcalls_to_convergence=_mean(_qcalls_at(r, k) for r, k in converged),
        mean_hamming=_mean(r.final_sample.hamming for r in ok
                           if r.final_sample is not None and r.final_sample.hamming is not None),
        lipschitz=lipschitz,
    )
    report.timing = {
        "mean_walltime": _mean(r.walltime for r in ok),
        "mean_time_per_iteration": _mean(r.walltime / r.iterations for r in ok if r.iterations),
        "mean_time_to_convergence": _mean(r.walltime * k / r.iterations for r, k in converged),
    }
    return report


def centroid_gap(cloud_a: Sequence[Any], cloud_b: Sequence[Any], metric: str = None) -> float:
    """
    Signed distance ``mean(cloud_b) - mean(cloud_a)`` between two point clouds.

    Clouds hold plain numbers, or reports (or mappings) read through
    ``metric``.
    """
    def values(cloud):
        out = []
        for item in cloud:
            if metric is None:
                out.append(float(item))
            elif isinstance(item, BenchmarkReport):
                out.append(item.metric(metric))
            else:
                out.append(float(item[metric]))
        return [v for v in out if math.isfinite(v)]

    a, b = values(cloud_a), values(cloud_b)
    if not a or not b:
        raise InsufficientDataError("centroid gap needs finite values in both clouds")
    return _mean(b) - _mean(a)


#------------------------------------------------------------------------
# Benchmark sweep
#------------------------------------------------------------------------
@dataclass(frozen=True)
class BenchmarkProtocol:
    """
    ``max_iterations=None`` uses the family cap of each method (60 for
    quasi-Newton and natural-gradient methods, 400 for stochastic ones).
    """

    restarts: int = DEFAULT_RESTARTS
    max_iterations: Optional[int] = None
    stop_modes: Sequence[str] = STOP_MODES
    rho: float = DEFAULT_RHO
    p: int = 1
    shots: Optional[int] = None
    final_shots: int = DEFAULT_FINAL_SHOTS
    gradient_floor: float = 0.0

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError(f"restarts must be positive, got {self.restarts}")
        for mode in self.stop_modes:
            if mode not in STOP_MODES:
                raise ConfigError(f"unknown stop mode {mode!r}; expected one of {STOP_MODES}")

    def cap(self, method: str) -> int:
        return self.max_iterations if self.max_iterations is not None else get_schema(method).iteration_cap

    def stop_rule(self, method: str, mode: str, truth: GroundTruth) -> StopRule:
        return StopRule(max_iterations=self.cap(method), tolerance_mode=mode, rho=self.rho, reference=truth,
                        gradient_floor=self.gradient_floor)


def _restore_walltimes(records: Dict[tuple, RunRecord], path: Path):
    if not path.exists():
        return
    for row in read_jsonl(path, "run_timing"):
        key = (row["problem"], row["method"], row["restart"], row["seed"])
        if key in records:
            records[key].walltime = row["walltime"]


def _run_protocol(problems: Mapping[str, WeightedGraph], truths, methods: Mapping[str, Mapping[str, Any]],
                  protocol: BenchmarkProtocol, mode: str, seed: int, out_dir: Optional[Path],
                  workers: int) -> List[BenchmarkReport]:
    runs_path = timing_path = None
    done: Dict[tuple, RunRecord] = {}
    if out_dir is not None:
        mode_dir = out_dir / _protocol_dir_map[mode]
        runs_path, timing_path = mode_dir / "runs.jsonl", mode_dir / "run_timings.jsonl"
        if runs_path.exists():
            done = {r.key: r for r in read_records(runs_path)}
            _restore_walltimes(done, timing_path)
            logger.info("resuming %s protocol: %d runs already in %s", mode, len(done), runs_path)

    reports = []
    for problem, graph in problems.items():
        truth = truths[problem]
        for method, hyper in methods.items():
            stop = protocol.stop_rule(method, mode, truth)
            tasks = [RunTask(problem, graph, method, dict(hyper), restart, seed, protocol.p, protocol.shots,
                             stop, protocol.final_shots, truth)
                     for restart in range(protocol.restarts)]
            missing = [t for t in tasks if t.key not in done]
            for record in execute_tasks(missing, workers):
                done[record.key] = record
                if runs_path is not None:
                    append_jsonl(runs_path, "run_record", record.to_dict())
                    append_jsonl(timing_path, "run_timing",
                                 {"problem": record.problem, "method": record.method, "restart": record.restart,
                                  "seed": record.seed, "walltime": record.walltime})
            records = [done[t.key] for t in tasks]
            reports.append(build_report(problem, method, mode, records, truth, protocol.rho))
    return reports


def run_benchmark(problems: Mapping[str, WeightedGraph], methods, protocol: BenchmarkProtocol = None,
                  seed: int = 0, out_dir=None, workers: int = 1) -> List[BenchmarkReport]:
    """
    Run every method on every problem under each stop mode of ``protocol``.

    Parameters
    ----------
    problems : mapping
        Problem key -> graph.  The key names the problem in records and
        seeds its initial points.
    methods : sequence of str, or mapping
        Method ids, or method id -> hyperparameter overrides.
    protocol : BenchmarkProtocol, optional
    seed : int
        Master seed.
    out_dir : path, optional
        When given, records are persisted there and reused on a rerun, and
        report tables are written.
    workers : int
        Process count; ``None`` uses the available CPUs.

    Returns
    -------
    list of BenchmarkReport
        Ordered by protocol, problem, then method as given.
    """
    protocol = protocol or BenchmarkProtocol()
    if not methods:
        logger.warning("no methods to benchmark; nothing to do")
        return []
    if not isinstance(methods, Mapping):
        methods = {m: {} for m in methods}
    for method in methods:
        get_schema(method)
    out_dir = Path(out_dir) if out_dir is not None else None
    truths = {key: brute_force(graph) for key, graph in problems.items()}
    reports = []
    for mode in protocol.stop_modes:
        reports.extend(_run_protocol(problems, truths, methods, protocol, mode, seed, out_dir, workers))
    if out_dir is not None:
        runs = {}
        for mode in protocol.stop_modes:
            path = out_dir / _protocol_dir_map[mode] / "runs.jsonl"
            runs[mode] = read_records(path) if path.exists() else []
        write_report_files(reports, runs, truths, out_dir, protocol.rho)
    return reports


def run_lipschitz_protocol(problems: Mapping[str, WeightedGraph], methods, restarts: int = DEFAULT_RESTARTS,
                           seed: int = 0, p: int = 1, shots: Optional[int] = None,
                           max_iterations: int = LIPSCHITZ_MAX_ITERATIONS, rho: float = LIPSCHITZ_RHO,
                           pooled: bool = False, out_dir=None,
                           workers: int = 1) -> Dict[tuple, Optional[LipschitzStats]]:
    """
    Robustness protocol: short runs that stop at ``rho`` (1 %) or after
    ``max_iterations`` (20), summarized by ``lipschitz_estimate``.

    Returns a mapping ``(problem, method) -> LipschitzStats``; a method whose
    runs mostly miss ``rho`` maps to None.  With ``out_dir`` the runs go to
    ``<out_dir>/lipschitz/runs.jsonl`` (resumable, like ``run_benchmark``)
    and the statistics to ``<out_dir>/lipschitz/lipschitz.csv``.
    """
    if not isinstance(methods, Mapping):
        methods = {m: {} for m in methods}
    for method in methods:
        get_schema(method)
    protocol = BenchmarkProtocol(restarts=restarts, max_iterations=max_iterations, stop_modes=("relative",),
                                 rho=rho, p=p, shots=shots, final_shots=0)
    runs_path = Path(out_dir) / "lipschitz" / "runs.jsonl" if out_dir is not None else None
    done: Dict[tuple, RunRecord] = {}
    if runs_path is not None and runs_path.exists():
        done = {r.key: r for r in read_records(runs_path)}

    results, rows = {}, []
    for problem, graph in problems.items():
        truth = brute_force(graph)
        for method, hyper in methods.items():
            stop = protocol.stop_rule(method, "relative", truth)
            tasks = [RunTask(problem, graph, method, dict(hyper), restart, seed, p, shots, stop)
                     for restart in range(restarts)]
            for record in execute_tasks([t for t in tasks if t.key not in done], workers):
                done[record.key] = record
                if runs_path is not None:
                    append_jsonl(runs_path, "run_record", record.to_dict())
            try:
                stats = lipschitz_estimate([done[t.key] for t in tasks], truth, rho, pooled)
            except InsufficientDataError as exc:
                logger.warning("%s/%s: no Lipschitz statistics: %s", problem, method, exc)
                stats = None
            results[(problem, method)] = stats
            row = {"problem": problem, "method": method, "n_runs": restarts,
                   "n_kept": stats.n_runs if stats else 0}
            row.update({name: getattr(stats, name) if stats else math.nan
                        for name in ("average", "std", "median", "iqr")})
            rows.append(row)
    if out_dir is not None:
        write_table(rows, LIPSCHITZ_COLUMNS, Path(out_dir) / "lipschitz" / "lipschitz.csv")
    return results


#------------------------------------------------------------------------
# Exports
#------------------------------------------------------------------------
def run_rows(records: Iterable[RunRecord], truth: GroundTruth, protocol: str,
             rho: float = DEFAULT_RHO) -> List[Dict[str, Any]]:
    rows = []
    for r in sorted(records, key=lambda r: r.key):
        k = iteration_of_convergence(r, truth, rho)
        sample = r.final_sample
        rows.append({
            "problem": r.problem, "method": r.method, "protocol": protocol, "restart": r.restart,
            "seed": r.seed, "iterations": r.iterations, "qcalls": r.qcalls, "final_f": r.final_f,
            "best_f": r.best_f, "converged": k is not None, "iterations_to_convergence": k,
            "qcalls_to_convergence": _qcalls_at(r, k) if k is not None else None,
            "skipped_updates": r.skipped_updates, "stop_reason": r.stop_reason, "failed": r.failed,
            "modal_bits": sample.bits if sample else None, "hamming": sample.hamming if sample else None,
        })
    return rows


def write_table(rows: Sequence[Mapping[str, Any]], columns: Sequence[str], path) -> Path:
    """CSV with a ``# schema_version`` first line and a fixed column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    with path.open("w") as fp:
        fp.write(f"# schema_version: {SCHEMA_VERSION}\n")
        frame.to_csv(fp, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_table(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_report_files(reports: Sequence[BenchmarkReport], runs: Mapping[str, Sequence[RunRecord]],
                       truths: Mapping[str, GroundTruth], out_dir, rho: float = DEFAULT_RHO) -> List[Path]:
    """
    ``reports.jsonl``, ``reports.csv`` and ``runs.csv`` (deterministic) plus
    ``timings.csv`` (machine dependent).
    """
    out_dir = Path(out_dir)
    rows = []
    for mode, records in runs.items():
        by_problem: Dict[str, List[RunRecord]] = {}
        for record in records:
            by_problem.setdefault(record.problem, []).append(record)
        for problem in sorted(by_problem):
            rows.extend(run_rows(by_problem[problem], truths[problem], mode, rho))
    return [
        write_jsonl(out_dir / "reports.jsonl", "benchmark_report",
                    (dict(r.row(), lipschitz_n_runs=r.lipschitz.n_runs if r.lipschitz else 0) for r in reports)),
        write_table([r.row() for r in reports], REPORT_COLUMNS, out_dir / "reports.csv"),
        write_table(rows, RUN_COLUMNS, out_dir / "runs.csv"),
        write_table([r.timing_row() for r in reports], TIMING_COLUMNS, out_dir / "timings.csv"),
    ]
