"""Collects outcomes of tests marked ``criterion(n)`` and prints one line per criterion."""

import pytest

_outcomes: dict[int, list[bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(n, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        runs = _outcomes[n]
        status = "PASS" if all(runs) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} ({sum(runs)}/{len(runs)} checks)")
