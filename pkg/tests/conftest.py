"""Collects the acceptance results and prints one line per criterion at the end of the run."""

from collections import OrderedDict

_RESULTS = OrderedDict()


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    key, title = mark.args
    entry = _RESULTS.setdefault(key, {"title": title, "passed": True, "notes": []})
    entry["passed"] &= call.excinfo is None
    measured = dict(item.user_properties).get("measured")
    if measured:
        entry["notes"].append(measured)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key, e in _RESULTS.items():
        status = "PASS" if e["passed"] else "FAIL"
        notes = "; ".join(e["notes"])
        terminalreporter.write_line(f"[{status}] criterion {key}: {e['title']}" + (f" ({notes})" if notes else ""))
