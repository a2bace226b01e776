"""Acceptance reporting: tests marked ``@pytest.mark.criterion("...")`` get one
PASS/FAIL line each in the terminal summary."""

import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_names = {}
_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): an acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _names[item.nodeid] = mark.args[0]


def pytest_runtest_logreport(report):
    name = _names.get(report.nodeid)
    if name is None:
        return
    if report.failed:
        _outcomes[name] = "FAIL"
    elif report.when == "call" and name not in _outcomes:
        _outcomes[name] = "PASS" if report.passed else "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, name in _names.items():
        outcome = _outcomes.get(name)
        if outcome:
            terminalreporter.write_line(f"{outcome}  {name}")
