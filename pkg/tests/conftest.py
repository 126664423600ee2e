from pathlib import Path

import numpy as np
import pytest

from fastbus.model import BusCandidate, Instance, Passenger, Route

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def toy():
    """One route A->B (120 s), passengers at 0, 10, 200, departures 0, 10, 200, n = 2."""
    route = Route("R", ("A", "B"), (0, 120))
    passengers = [Passenger("A", "B", t, k) for k, t in enumerate((0, 10, 200), start=1)]
    cands = [BusCandidate("R", d) for d in (0, 10, 200)]
    return Instance([route], passengers, cands, {"R": 2})


@pytest.fixture
def abc():
    return {"L": Route("L", ("A", "B", "C"), (0, 300, 600))}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import VERDICTS
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
