import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from acceptance_log import ACCEPTANCE  # noqa: E402
from vplinear.equilibrium import make_maxwellian, make_power_law  # noqa: E402


@pytest.fixture(scope="session")
def maxw():
    return {d: make_maxwellian(d) for d in (1, 2, 3)}


@pytest.fixture(scope="session")
def plaw():
    return {d: make_power_law(d, 4.0) for d in (1, 2, 3)}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
