import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA = {}


@pytest.fixture
def criterion():
    """record(num, title, ok, detail, elapsed, limit): one pass/fail line per acceptance criterion."""
    def record(num, title, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        line = f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail} ({elapsed:.1f} s, limit {limit} s)"
        _CRITERIA[num] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
