from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from epr import DescriptorSet, SyntheticSpec, generate_synthetic  # noqa: E402

_CRITERIA: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marks = getattr(report, "criterion", None)
    if marks:
        _CRITERIA[report.nodeid] = (marks, "PASS" if report.passed else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark:
        rep.criterion = f"criterion {mark.args[0]:>2}: {mark.args[1]}"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    # parametrized cases of one criterion collapse into a single line
    merged: dict[str, str] = {}
    for label, status in _CRITERIA.values():
        merged[label] = "FAIL" if "FAIL" in (status, merged.get(label)) else status
    terminalreporter.section("acceptance criteria")
    for label in sorted(merged):
        terminalreporter.write_line(f"{merged[label]}  {label}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def orthogonal_db():
    return DescriptorSet(np.eye(3))


@pytest.fixture(scope="session")
def loop_dataset():
    """50 places driven twice in the database, 10 query laps over them."""
    spec = SyntheticSpec(
        num_places=50,
        dim=128,
        db_route=list(range(50)) * 2,
        query_route=[t % 50 for t in range(500)],
        condition_noise_sigma=0.05,
        rng_seed=7,
    )
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def line_dataset():
    spec = SyntheticSpec(200, 64, list(range(200)), list(range(200)), 0.05, 42)
    return generate_synthetic(spec)
