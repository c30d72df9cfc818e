"""The ten acceptance criteria at their stated tolerances, one test each.

Each test prints a single pass/fail line; the lines are also collected into
a summary section at the end of the pytest run.
"""

import pytest

from padic_hilbert.selftest import CRITERIA, SuiteConfig
from conftest import record_acceptance

CONFIG = SuiteConfig()


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n}")
def test_criterion(number, capsys):
    result = CRITERIA[number](CONFIG)
    line = result.line()
    record_acceptance(line)
    with capsys.disabled():
        print("\n" + line)
    assert result.passed, result.detail
