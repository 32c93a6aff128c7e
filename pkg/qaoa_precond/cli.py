"""
Command-line front end.

::

    qaoa_precond generate --n 5 --seed 7 --output data/problems/maxcut_5.txt
    qaoa_precond run --problem-file data/problems/maxcut_3.txt --method sp_bfgs --output-dir runs/one
    qaoa_precond bench --config bmi_config_files/experiment_maxcut_3.yml --workers 4
    qaoa_precond tune --config bmi_config_files/experiment_maxcut_3.yml --method sp_bfgs --names alpha,N0,Ns
    qaoa_precond scan --problem-file data/problems/maxcut_5.txt --grid 300 --output-dir runs/scan

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
4 insufficient data.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from qaoa_precond import bench, problems
from qaoa_precond.bmi_optimizer import bmi_QAOAOptimizer
from qaoa_precond.config import (ExperimentConfig, configure_logging, load_hyper_file, read_yaml,
                                 write_effective_config, write_manifest, write_yaml)
from qaoa_precond.errors import EXIT_CONFIG, EXIT_OK, ConfigError, QAOAPrecondError
from qaoa_precond.qaoa_sim import AnsatzConfig
from qaoa_precond.records import SCHEMA_VERSION, read_records, write_records
from qaoa_precond.schemas import METHOD_IDS, resolve_hyper, schema_table
from qaoa_precond.tuner import TrialLog, tune

logger = logging.getLogger(__name__)


#------------------------------------------------------------------------
# Argument parsing
#------------------------------------------------------------------------
def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--seed", type=int, help="master seed")


def _add_experiment(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="experiment YAML file")
    parser.add_argument("--problem-file", type=Path, help="graph fixture")
    parser.add_argument("--p", type=int, help="QAOA layers")
    parser.add_argument("--shots", type=int, help="samples per expectation (default: exact)")
    parser.add_argument("--output-dir", type=Path, help="directory for every output file")
    parser.add_argument("--workers", type=int, help="worker processes (default: available CPUs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qaoa_precond",
                                     description="Preconditioned optimizers for QAOA MaxCut")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("generate", help="write a random connected MaxCut instance")
    _add_common(gen)
    gen.add_argument("--n", type=int, required=True, help="number of vertices")
    gen.add_argument("--density", type=float, default=1.0, help="edge probability")
    gen.add_argument("--weight-low", type=float, default=1.0)
    gen.add_argument("--weight-high", type=float, default=1.0)
    gen.add_argument("--output", type=Path, help="fixture path (default data/problems/maxcut_<n>_<seed>.txt)")

    run = commands.add_parser("run", help="one optimization run driven through the BMI component")
    _add_common(run)
    run.add_argument("--config", type=Path, help="BMI run configuration (YAML)")
    run.add_argument("--problem-file", type=Path)
    run.add_argument("--method", choices=METHOD_IDS, metavar="METHOD")
    run.add_argument("--hyper-file", type=Path, help="YAML file naming every tunable of the method")
    run.add_argument("--restart", type=int)
    run.add_argument("--p", type=int)
    run.add_argument("--shots", type=int)
    run.add_argument("--max-iter", type=int)
    run.add_argument("--stop-mode", choices=("none", "relative"))
    run.add_argument("--rho", type=float)
    run.add_argument("--final-shots", type=int)
    run.add_argument("--output-dir", type=Path, default=Path("runs/run"))

    ben = commands.add_parser("bench", help="benchmark sweep over methods and restarts")
    _add_common(ben)
    _add_experiment(ben)
    ben.add_argument("--method", action="append", metavar="METHOD", help="repeat for several methods")
    ben.add_argument("--hyper-file", type=Path, help="hyperparameters for a single --method")
    ben.add_argument("--restarts", type=int)
    ben.add_argument("--max-iter", type=int)
    ben.add_argument("--stop-mode", choices=("none", "relative", "both"))
    ben.add_argument("--rho", type=float)
    ben.add_argument("--lipschitz", action="store_true",
                     help="also run the short 1%% stop protocol and write Lipschitz statistics")

    tun = commands.add_parser("tune", help="Bayesian hyperparameter tuning of one method")
    _add_common(tun)
    _add_experiment(tun)
    tun.add_argument("--method", required=True, metavar="METHOD")
    tun.add_argument("--hyper-file", type=Path, help="fixed hyperparameters (tuned ones are overridden)")
    tun.add_argument("--budget", type=int, help="number of sweeps")
    tun.add_argument("--n-init", type=int, help="random sweeps before the surrogate is used")
    tun.add_argument("--restarts", type=int, help="runs averaged per sweep")
    tun.add_argument("--names", help="comma-separated tunables (default: all)")
    tun.add_argument("--max-iter", type=int)
    tun.add_argument("--stop-mode", choices=("none", "relative"))
    tun.add_argument("--rho", type=float)

    scan = commands.add_parser("scan", help="objective on a 2-D slice through parameter space")
    _add_common(scan)
    _add_experiment(scan)
    scan.add_argument("--center", help="comma-separated angles (default: restart 0 starting point)")
    scan.add_argument("--run-record", type=Path, help="center on the final angles of this record file")
    scan.add_argument("--grid", type=int, default=bench.LANDSCAPE_GRID)
    scan.add_argument("--extent", type=float, default=1.0)
    return parser


def _set(mapping: Dict[str, Any], section: Optional[str], key: str, value):
    if value is None:
        return
    target = mapping
    if section:
        if not isinstance(mapping.get(section), dict):
            mapping[section] = {}
        target = mapping[section]
    target[key] = value


def experiment_from_args(args) -> ExperimentConfig:
    """Experiment file (if any) with command-line flags layered on top."""
    cfg = read_yaml(args.config) if args.config is not None else {}
    if args.problem_file is not None:
        cfg["problem"] = {"problem_file": args.problem_file}
    _set(cfg, "ansatz", "p", args.p)
    _set(cfg, "ansatz", "shots", args.shots)
    _set(cfg, None, "output_dir", args.output_dir)
    _set(cfg, None, "workers", args.workers)
    _set(cfg, None, "seed", args.seed)
    if getattr(args, "method", None) and args.command == "bench":
        if args.hyper_file is not None and len(args.method) != 1:
            raise ConfigError("--hyper-file needs exactly one --method")
        entry = {"hyper_file": args.hyper_file} if args.hyper_file is not None else {}
        cfg["methods"] = {m: dict(entry) for m in args.method}
    _set(cfg, "protocol", "restarts", getattr(args, "restarts", None) if args.command == "bench" else None)
    _set(cfg, "protocol", "max_iterations", getattr(args, "max_iter", None))
    _set(cfg, "protocol", "rho", getattr(args, "rho", None))
    stop_mode = getattr(args, "stop_mode", None)
    if stop_mode is not None and args.command == "bench":
        _set(cfg, "protocol", "stop_modes", ["none", "relative"] if stop_mode == "both" else [stop_mode])
    if args.command == "tune":
        _set(cfg, "tuning", "budget", args.budget)
        _set(cfg, "tuning", "n_init", args.n_init)
        _set(cfg, "tuning", "restarts", args.restarts)
        _set(cfg, "tuning", "stop_mode", stop_mode)
        if args.names:
            _set(cfg, "tuning", "names", [n.strip() for n in args.names.split(",") if n.strip()])
    if "problem" not in cfg:
        raise ConfigError("no problem given; use --problem-file or a 'problem' section in --config")
    return ExperimentConfig.from_dict(cfg)


#------------------------------------------------------------------------
# Commands
#------------------------------------------------------------------------
def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    graph = problems.generate_problem(args.n, seed, args.density, (args.weight_low, args.weight_high))
    path = args.output or Path("data/problems") / f"maxcut_{args.n}_{seed}.txt"
    problems.write_graph(graph, path)
    print(f"wrote {path}: {graph.n_vertices} vertices, {graph.n_edges} edges")
    return EXIT_OK


def _run_config(args) -> Dict[str, Any]:
    cfg = read_yaml(args.config) if args.config is not None else {}
    flags = {"problem_file": args.problem_file, "method": args.method, "hyper_file": args.hyper_file,
             "seed": args.seed, "restart": args.restart, "p": args.p, "shots": args.shots,
             "max_iterations": args.max_iter, "stop_mode": args.stop_mode, "rho": args.rho,
             "final_shots": args.final_shots}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    cfg["verbose"] = max(int(cfg.get("verbose", 0)), args.verbose)
    return cfg


def cmd_run(args) -> int:
    out_dir = Path(args.output_dir)
    run_config = write_yaml(_run_config(args), out_dir / "run_config.yml")

    model = bmi_QAOAOptimizer()
    model.initialize(bmi_cfg_file=run_config)
    model.update_until(model.get_end_time())
    model.finalize()

    effective = dict(model.cfg_bmi, hyper=dict(model.run.hyper), max_iterations=int(model.get_end_time()),
                     schema_version=SCHEMA_VERSION)
    files = [run_config, write_yaml(effective, out_dir / "effective_config.yml"),
             write_records(out_dir / "run.jsonl", [model.record])]
    write_manifest(out_dir, files, "run")

    record = model.record
    status = "FAILED " + record.reason if record.failed else record.stop_reason
    print(f"method={record.method} iterations={record.iterations} qcalls={record.qcalls} "
          f"f0={record.f0:.6f} final_f={record.final_f:.6f} best_f={record.best_f:.6f} "
          f"optimum={model.truth.optimal_value:.6f} converged={record.converged} stop={status}")
    if record.final_sample is not None:
        print(f"modal cut {record.final_sample.bits} (frequency {record.final_sample.frequency:.3f}, "
              f"hamming {record.final_sample.hamming})")
    return EXIT_OK


def _protocol(config: ExperimentConfig) -> bench.BenchmarkProtocol:
    p = config.protocol
    return bench.BenchmarkProtocol(restarts=p.restarts, max_iterations=p.max_iterations, stop_modes=p.stop_modes,
                                   rho=p.rho, p=config.ansatz.p, shots=config.ansatz.shots,
                                   final_shots=p.final_shots, gradient_floor=p.gradient_floor)


def cmd_bench(args) -> int:
    config = experiment_from_args(args)
    configure_logging(max(config.verbose, args.verbose))
    if not config.methods:
        logger.warning("method list is empty; nothing to benchmark")
        return EXIT_OK
    out_dir = config.output_dir
    graph = config.problem.load()
    files = [write_effective_config(config, out_dir)]
    reports = bench.run_benchmark({config.problem.key: graph}, config.methods, _protocol(config), config.seed,
                                  out_dir, config.workers)
    lipschitz = {}
    if args.lipschitz:
        lipschitz = bench.run_lipschitz_protocol({config.problem.key: graph}, config.methods,
                                                 config.protocol.restarts, config.seed, config.ansatz.p,
                                                 config.ansatz.shots, out_dir=out_dir, workers=config.workers)
    files.extend(f for f in out_dir.rglob("*") if f.is_file() and f.name != "manifest.yml")
    write_manifest(out_dir, files, "bench")
    for r in reports:
        print(f"{r.protocol:>8} {r.method:>10}: convergence {r.convergence_ratio:.2f}  "
              f"mean final f {r.mean_final_f:.6f}  mean qcalls {r.mean_qcalls:.1f}  failed {r.n_failed}")
    for (_, method), stats in lipschitz.items():
        summary = (f"average {stats.average:.4g}  std {stats.std:.4g}  median {stats.median:.4g}  "
                   f"iqr {stats.iqr:.4g}" if stats else "too few runs within 1%")
        print(f"lipschitz {method:>10}: {summary}")
    return EXIT_OK


def cmd_tune(args) -> int:
    config = experiment_from_args(args)
    configure_logging(max(config.verbose, args.verbose))
    method = args.method
    fixed = dict(config.methods.get(method) or resolve_hyper(method))
    if args.hyper_file is not None:
        fixed = resolve_hyper(method, load_hyper_file(args.hyper_file))
    spec = config.tuning
    out_dir = config.output_dir / f"tune_{method}"
    log_path = out_dir / "trials.jsonl"
    log = TrialLog.load(log_path) if log_path.exists() else TrialLog(log_path)
    graph = config.problem.load()
    files = [write_effective_config(config, out_dir)]
    result = tune(method, graph, spec.budget, config.seed, restarts=spec.restarts, names=spec.names,
                  p=config.ansatz.p, shots=config.ansatz.shots, max_iterations=config.protocol.max_iterations,
                  stop_mode=spec.stop_mode, rho=config.protocol.rho, fixed=fixed, n_init=spec.n_init,
                  workers=config.workers or 1, log=log, problem=config.problem.key)
    best_hyper = resolve_hyper(method, dict(fixed, **result.best_params))
    files.append(write_yaml({"schema_version": SCHEMA_VERSION, "method": method, "problem": config.problem.key,
                             "budget": spec.budget, "best_value": result.best_value, "best_hyper": best_hyper,
                             "schema": schema_table(method)},
                            out_dir / "best_hyper.yml"))
    files.append(log_path)
    write_manifest(out_dir, files, "tune")
    print(f"{method}: best mean final f {result.best_value:.6f} after {len(result.log)} sweeps")
    for name in result.space.names:
        print(f"  {name} = {best_hyper[name]:.6g}")
    return EXIT_OK


def _scan_center(args, config: ExperimentConfig, graph) -> np.ndarray:
    if args.center and args.run_record:
        raise ConfigError("give either --center or --run-record, not both")
    if args.center:
        return np.array([float(x) for x in args.center.split(",")])
    if args.run_record:
        records = read_records(args.run_record)
        if not records:
            raise ConfigError(f"{args.run_record} holds no run records")
        return np.array(records[0].final_theta, dtype=float)
    return bench.initial_theta(config.seed, config.problem.key, 0, config.ansatz.p)


def cmd_scan(args) -> int:
    config = experiment_from_args(args)
    configure_logging(max(config.verbose, args.verbose))
    graph = config.problem.load()
    center = _scan_center(args, config, graph)
    if center.size != 2 * config.ansatz.p:
        raise ConfigError(f"center has {center.size} angles, expected {2 * config.ansatz.p}")
    landscape = bench.landscape_scan(graph, AnsatzConfig(graph.n_vertices, config.ansatz.p), center,
                                     grid=args.grid, extent=args.extent, seed=config.seed)
    out_dir = config.output_dir
    files = [write_effective_config(config, out_dir),
             bench.write_landscape_text(landscape, out_dir / "landscape.txt"),
             bench.write_landscape_netcdf(landscape, out_dir / "landscape.nc")]
    write_manifest(out_dir, files, "scan")
    print(f"landscape {args.grid}x{args.grid}: min {float(landscape.min()):.6f} max {float(landscape.max()):.6f}")
    return EXIT_OK


_command_map = {"generate": cmd_generate, "run": cmd_run, "bench": cmd_bench, "tune": cmd_tune, "scan": cmd_scan}


def main(argv: Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return _command_map[args.command](args)
    except QAOAPrecondError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
