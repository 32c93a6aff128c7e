import json
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qaoa_precond import problems

settings.register_profile("fast", max_examples=25, deadline=None)
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fast"))

REPO_ROOT = Path(__file__).resolve().parents[2]
PROBLEM_DIR = REPO_ROOT / "data" / "problems"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the long statistical and trend tests")
    parser.addoption("--update-golden", action="store_true", default=False,
                     help="rewrite the reference values under tests/golden")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical or trend test (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def maxcut_3_path():
    return PROBLEM_DIR / "maxcut_3.txt"


@pytest.fixture
def maxcut_5_path():
    return PROBLEM_DIR / "maxcut_5.txt"


@pytest.fixture
def maxcut_3(maxcut_3_path):
    return problems.read_graph(maxcut_3_path)


@pytest.fixture
def maxcut_5(maxcut_5_path):
    return problems.read_graph(maxcut_5_path)


@pytest.fixture
def k2():
    return problems.WeightedGraph(2, ((0, 1, 1.0),))


@pytest.fixture
def unit_triangle():
    return problems.complete_graph(3)


@pytest.fixture
def golden(request):
    """
    Compare ``value`` with the stored ``golden/<name>.json``.

    A missing file fails the test.  ``pytest --update-golden`` rewrites the
    file from the current value instead of comparing.
    """
    update = request.config.getoption("--update-golden")

    def check(name, value, rtol=0.0, atol=1e-12):
        path = GOLDEN_DIR / f"{name}.json"
        value = np.asarray(value, dtype=float)
        if update:
            GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(value.tolist()))
            return
        if not path.exists():
            pytest.fail(f"no golden file {path.name}; record it with --update-golden")
        expected = np.asarray(json.loads(path.read_text()), dtype=float)
        assert value.shape == expected.shape
        np.testing.assert_allclose(value, expected, rtol=rtol, atol=atol)

    return check
