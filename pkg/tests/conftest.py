import io

import pytest
from hypothesis import HealthCheck, settings

from dmcis import parse_scenario
from dmcis.world import Simulation

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def simulate(doc, seed=None, until=None):
    """Run a raw scenario document; returns (simulation, trace text)."""
    sink = io.StringIO()
    sim = Simulation(parse_scenario(doc), seed=seed, trace_sink=sink)
    sim.run(until)
    return sim, sink.getvalue()


@pytest.fixture
def run():
    return simulate


_acceptance = []


def pytest_runtest_logreport(report):
    if "acceptance" in report.keywords and (report.when == "call" or report.outcome != "passed"):
        if report.when == "call" or report.failed:
            _acceptance.append((report.nodeid.rsplit("::", 1)[-1], report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _acceptance:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}  ({duration:.2f} s)")
