"""Prints one PASS/FAIL line per acceptance criterion after the run.

Tests opt in with ``@pytest.mark.acceptance("label")``; a criterion passes
only when every test carrying its label passed.
"""
from collections import OrderedDict

import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): test backs the named acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark:
            item.user_properties.append(("acceptance", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    results = OrderedDict()
    for reports in terminalreporter.stats.values():
        for rep in reports:
            label = dict(getattr(rep, "user_properties", ())).get("acceptance")
            if label is None or not isinstance(rep, pytest.TestReport):
                continue
            ok = rep.passed or (rep.when != "call" and not rep.failed)
            results[label] = results.get(label, True) and ok
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(results, key=_order):
        terminalreporter.write_line(f"{'PASS' if results[label] else 'FAIL'}  {label}")


def _order(label):
    # labels start with a zero-padded index
    return label.split(" ", 1)[0]
