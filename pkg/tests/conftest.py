import functools
import random

import pytest

from padic_hilbert.field import LocalSetup, RationalSetup
from padic_hilbert.padic import PadicCtx


@functools.lru_cache(maxsize=None)
def local_setup(D: int, p: int, M: int) -> LocalSetup:
    return LocalSetup(D, p, M)


@pytest.fixture
def split7():
    return local_setup(2, 7, 12)


@pytest.fixture
def inert5():
    return local_setup(2, 5, 12)


@pytest.fixture(params=[(2, 7), (2, 5)], ids=["split7", "inert5"])
def quad_setup(request):
    D, p = request.param
    return local_setup(D, p, 12)


@pytest.fixture
def rational7():
    return RationalSetup(PadicCtx(7, 1, 12))


@pytest.fixture
def rng():
    return random.Random(1234)


_ACCEPTANCE_LINES: list = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
