"""Collects the ``criterion`` marked tests and prints one verdict line each."""

from collections import OrderedDict

import pytest

_RESULTS: "OrderedDict[str, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion this test checks")


def pytest_collection_finish(session):
    for item in session.items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            key, title = mark.args
            entry = _RESULTS.setdefault(key, {"title": title, "parts": OrderedDict()})
            entry["parts"][item.nodeid] = None


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    parts = _RESULTS[mark.args[0]]["parts"]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        parts[item.nodeid] = "skipped" if rep.skipped else ("passed" if rep.passed else "failed")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key, entry in _RESULTS.items():
        states = entry["parts"]
        if any(s is None for s in states.values()):
            verdict = "NOT RUN"
        elif all(s == "passed" for s in states.values()):
            verdict = "PASS"
        else:
            verdict = "FAIL"
        line = f"{verdict} {key}: {entry['title']}"
        bad = [nid.split("::", 1)[1] for nid, s in states.items() if s not in ("passed", None)]
        if bad:
            line += f"  [failing: {', '.join(bad)}]"
        tr.write_line(line)
