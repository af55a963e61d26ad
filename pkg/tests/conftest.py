import os

import pytest
from hypothesis import HealthCheck, settings

from platforming.generators import virtual_station
from platforming.network import TimeGrid, build_network
from platforming.timetable import Train, Weights

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def shared_entry_trains(arrival_window=(0, 300)):
    """Two eastbound line-A trains sharing the entry switch group SG1.

    T1 takes the 90 s crossover route to S3 and passes SG1 after 30 s; T2 heads
    for a line-A siding and wants to start at the same instant.
    """
    t1 = Train("T1", "EA_L", "LB_R", 90, 270, (0, 0), (0, 120), 12, 20)
    t2 = Train("T2", "EA_L", "LA_R", 60, 240, arrival_window, (0, 300), 12, 20)
    return [t1, t2]


def shared_entry_network(mode="sectional_release", headway=30):
    return build_network(virtual_station(headway, mode), shared_entry_trains(), TimeGrid(2400, 15), Weights(1, 1))


@pytest.fixture
def station():
    return virtual_station()


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
