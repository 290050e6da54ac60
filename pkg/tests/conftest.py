import numpy as np
import pytest

from platoonlat.control import reference_gains
from platoonlat.model import LINCOLN_MKZ


@pytest.fixture
def params():
    return LINCOLN_MKZ


@pytest.fixture
def gains():
    return reference_gains()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one ``criterion N: PASS|FAIL ...`` line per acceptance criterion."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
