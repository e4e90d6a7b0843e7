"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

_outcomes = {}
_titles = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, title = marker.args
            _titles[number] = title
            item.user_properties.append(("criterion", number))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is not None and (report.when == "call" or report.failed):
        _outcomes.setdefault(crit, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_outcomes):
        verdict = "PASS" if all(_outcomes[crit]) else "FAIL"
        terminalreporter.write_line(f"criterion {crit:2d}: {verdict}  {_titles[crit]}")
