import functools

import pytest

from hausdorff_symbol.fixtures import load_fixture
from hausdorff_symbol.quadrature import discretize_measure


@functools.lru_cache(maxsize=None)
def fixture_pair(name):
    spec = load_fixture(name)
    return spec, discretize_measure(spec)


@pytest.fixture
def pair():
    return fixture_pair


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
