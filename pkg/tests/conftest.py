"""Test configuration: hypothesis profile and a per-criterion acceptance summary."""

import re

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_acceptance: dict = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.skipped:
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        if _acceptance.get(n) != "FAIL":
            _acceptance[n] = outcome
    elif report.failed:
        _acceptance[n] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_acceptance):
        terminalreporter.write_line(f"criterion {n:>2}: {_acceptance[n]}")
