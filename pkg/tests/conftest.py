import time

import pytest

from ddosguard.scenarios import ATTACKED_VM, canonical_config
from ddosguard.sim.engine import Simulation

_verdicts = pytest.StashKey[list]()


class Timed:
    def __init__(self, sim, seconds):
        self.sim = sim
        self.seconds = seconds


def _run(name, **kw):
    t0 = time.perf_counter()
    sim = Simulation(canonical_config(name), **kw)
    sim.run()
    return Timed(sim, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def scenario_one():
    return _run("one")


@pytest.fixture(scope="session")
def scenario_two():
    return _run("two", keep_packets={ATTACKED_VM})


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per criterion, then fail the test if any check failed."""
    lines = request.config.stash.setdefault(_verdicts, [])

    def report(number, title, checks):
        bad = [name for name, ok in checks.items() if not ok]
        status = "FAIL" if bad else "PASS"
        line = f"{status} criterion {number}: {title}"
        if bad:
            line += "  [failed: " + "; ".join(bad) + "]"
        lines.append((number, line))
        print(line)
        assert not bad, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_verdicts, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
