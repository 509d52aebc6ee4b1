import numpy as np
import pytest

from ringlab import DomainKind, MeridionalDomain, TruncationBox, build_grid


@pytest.fixture(scope="session")
def rect_grid():
    dom = MeridionalDomain(DomainKind.RECTANGLE, b=1.0, c=1.0)
    return build_grid(dom, TruncationBox(1.0, 1.0), 48, 96)


@pytest.fixture(scope="session")
def halfplane_grid():
    dom = MeridionalDomain(DomainKind.HALF_PLANE)
    return build_grid(dom, TruncationBox(2.0, 2.0), 64, 64)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)


def pytest_terminal_summary(terminalreporter):
    """Echo one verdict line per acceptance criterion after the run."""
    import sys

    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get(
        "test_acceptance")
    if mod is None or not getattr(mod, "VERDICTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.VERDICTS:
        terminalreporter.write_line(line)
