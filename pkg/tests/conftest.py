import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from robust_periodic.systems import get_system

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def lin1d():
    return get_system("linear1d")


@pytest.fixture(scope="session")
def lin2d():
    return get_system("linear2d")


@pytest.fixture(scope="session")
def bio10():
    return get_system("bioreactor", n_modes=10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        num, title = mark.args
        ok = rep.passed
        prev = _CRITERIA.get(num, (title, True, 0.0))
        _CRITERIA[num] = (title, prev[1] and ok, prev[2] + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok, dur = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}  ({dur:.1f}s)")
