"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line each."""

import pytest

_OUTCOMES: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    label = marker.args[0]
    if report.when == "setup" and report.skipped:
        _OUTCOMES[label] = "SKIP"
    elif report.when == "call":
        _OUTCOMES[label] = "SKIP" if report.skipped else "PASS" if report.passed else "FAIL"
    elif report.failed:
        _OUTCOMES[label] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in _OUTCOMES.items():
        terminalreporter.write_line(f"{status} {label}")
