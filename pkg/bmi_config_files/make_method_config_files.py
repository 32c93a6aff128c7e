"""
Write one BMI run configuration per optimizer.

Usage::

    python make_method_config_files.py [problem_file] [output_dir]

Hyperparameters are left to the schema defaults; add a ``hyper`` mapping or
a ``hyper_file`` key to a generated file to override them.
"""

import sys
from pathlib import Path

import yaml

from qaoa_precond.schemas import METHOD_IDS, get_schema


def method_config(method, problem_file, seed=0):
    return {
        'problem_file': str(problem_file),
        'method': method,
        'hyper': {},
        'p': 1,
        'shots': None,
        'seed': seed,
        'restart': 0,
        'max_iterations': get_schema(method).iteration_cap,
        'stop_mode': 'none',
        'rho': 0.03,
        'gradient_floor': 0.0,
        'final_shots': 512,
        'verbose': 0,
    }


def write_method_config_files(problem_file, output_dir):
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    problem = Path(problem_file).stem
    written = []
    for method in METHOD_IDS:
        path = output_dir / f"{problem}_{method}.yml"
        with path.open("w") as fp:
            yaml.safe_dump(method_config(method, problem_file), fp, sort_keys=False)
        written.append(path)
    return written


if __name__ == '__main__':
    problem_file = sys.argv[1] if len(sys.argv) > 1 else "./data/problems/maxcut_3.txt"
    output_dir = sys.argv[2] if len(sys.argv) > 2 else "./bmi_config_files"
    for path in write_method_config_files(problem_file, output_dir):
        print(path)
