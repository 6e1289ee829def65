"""Prints one PASS/FAIL line per acceptance criterion after the run."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")
_outcomes: dict[int, list[tuple[str, str]]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(int(m.group(1)), []).append((m.group(2), report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_outcomes):
        parts = _outcomes[num]
        ok = all(outcome == "passed" for _, outcome in parts)
        names = ", ".join(sorted({name for name, _ in parts}))
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  ({names})")
