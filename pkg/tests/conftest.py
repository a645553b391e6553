"""Shared test plumbing: per-criterion summary lines for the acceptance suite."""

import pytest

_ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in item.nodeid:
        return
    name = item.name
    marker = "test_criterion_"
    if marker not in name:
        return
    try:
        number = int(name.split(marker, 1)[1].split("_", 1)[0])
    except ValueError:
        return
    doc = item.function.__doc__ or name
    _ACCEPTANCE_RESULTS[number] = (report.outcome, doc.strip().splitlines()[0])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE_RESULTS):
        outcome, description = _ACCEPTANCE_RESULTS[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:02d} {status} - {description}")
