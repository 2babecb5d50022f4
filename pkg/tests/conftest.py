import numpy as np
import pytest

from fairlp.instances import random_instance
from fairlp.prob_core import DistortionMatrix

CRITERIA = {
    1: "grid-search oracle matches LP optima",
    2: "closed-form budget bounds",
    3: "curve shape: monotone, convex, piecewise linear",
    4: "A-aware pre-processing never worse",
    5: "post-processor replaced by a pre-processor",
    6: "pre-processing strictly beats post-processing at minimal budgets",
    7: "TV and mutual information decouple",
    8: "exact fairness program matches the zero-crossing budget",
    9: "simplex matches basis enumeration and is deterministic",
    10: "pre-processing can undercut the unprocessed distortion",
}

_outcomes: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    # setup errors count as failures; otherwise only the call phase decides
    if report.when == "call" or (report.when == "setup" and not report.passed):
        for marker in item.iter_markers("criterion"):
            _outcomes.setdefault(marker.args[0], []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        ok = all(o == "passed" for o in _outcomes[n])
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {CRITERIA.get(n, '')}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def zero_one():
    return DistortionMatrix.zero_one(2)


@pytest.fixture
def instance(rng):
    return random_instance(rng)
