import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion; the test outcome decides it."""
    log = request.config.stash.setdefault(_VERDICTS, [])

    def declare(label: str):
        log.append((label, request.node))
    return declare


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_VERDICTS, [])
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for label, node in log:
        reports = [r for r in terminalreporter.getreports("passed") + terminalreporter.getreports("failed")
                   if r.nodeid == node.nodeid]
        ok = bool(reports) and all(r.passed for r in reports)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
