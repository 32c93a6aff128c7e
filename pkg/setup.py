#!/usr/bin/env python

from setuptools import setup, find_packages

setup(
    name="qaoa_precond",
    version="1.0.0",
    description="Preconditioned classical optimizers for QAOA MaxCut, with a statevector simulator, "
                "benchmark harness and Bayesian hyperparameter tuning",
    include_package_data=True,  # (bmi_config_files, data/problems)
    packages=find_packages(include=['qaoa_precond', 'qaoa_precond.*']),
    python_requires=">=3.9",
    # numpy>=1.22 for numpy.percentile(method=...)
    install_requires=["numpy>=1.22", "scipy", "pandas", "bmipy", "pyyaml", "netCDF4", "xarray", "networkx"],
    extras_require={"tests": ["pytest", "hypothesis"]},
    entry_points={"console_scripts": ["qaoa_precond=qaoa_precond.cli:main"]},
)
