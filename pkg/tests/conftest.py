"""Collects per-criterion outcomes of the acceptance suite and prints one line each."""

import pytest

_outcomes: dict = {}
_labels: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            num, label = m.args
            _labels[num] = label
            item.user_properties.append(("criterion", num))


def pytest_runtest_logreport(report):
    num = dict(report.user_properties).get("criterion")
    if num is None:
        return
    if report.when == "call" or report.outcome != "passed":
        ok = report.outcome == "passed"
        _outcomes[num] = _outcomes.get(num, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _labels:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_labels):
        if num not in _outcomes:
            status = "NOT RUN"
        else:
            status = "PASS" if _outcomes[num] else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {_labels[num]}: {status}")
