import numpy as np
import pytest

from basinmeasures.core import TrajectoryOutcome, Verdict

ACCEPTANCE_LINES: list[str] = []


def make_outcome(verdict, return_time=None, ic=(0.0,)):
    ic = np.asarray(ic, dtype=float)
    return TrajectoryOutcome(initial_condition=ic, verdict=Verdict(verdict), return_time=return_time,
                             terminal_state=ic.copy())


@pytest.fixture
def outcome():
    return make_outcome


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
