import pytest

from gkdv_stab.potential import Nonlinearity, ParamPoint


@pytest.fixture(scope="session")
def kdv():
    return Nonlinearity.power_law(1)


@pytest.fixture(scope="session")
def kdv_point(kdv):
    return ParamPoint(0.0, -0.05, 1.0, kdv)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, TITLES
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(TITLES):
        terminalreporter.write_line(RESULTS.get(n, f"NOT RUN criterion {n:2d} ({TITLES[n]})"))
