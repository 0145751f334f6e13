import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from opfield import battery as bat  # noqa: E402
from opfield.grids import PolarGrid  # noqa: E402
from opfield.phase_space import RadialVectorField, symbol_battery  # noqa: E402
from opfield.weyl import quantize_diffop  # noqa: E402

_ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def grid():
    return PolarGrid()


@pytest.fixture(scope="session")
def sections(grid):
    return bat.section_battery(grid)


@pytest.fixture(scope="session")
def symbols():
    return symbol_battery()


@pytest.fixture(scope="session")
def X0():
    return RadialVectorField.x0()


@pytest.fixture(scope="session")
def X2():
    return RadialVectorField.monomial(2)


@pytest.fixture(scope="session")
def ops(grid, symbols):
    return {k: quantize_diffop(u, grid) for k, u in symbols.items()}


@pytest.fixture(scope="session")
def acceptance_log():
    """One summary line per acceptance criterion, printed at the end of the run."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[k])
