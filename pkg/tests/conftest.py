from __future__ import annotations

import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_results: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    number, title = int(match.group(1)), match.group(2).replace("_", " ")
    if report.when == "call" or report.failed or report.skipped:
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        previous = _results.get(number)
        if previous is None or previous[0] == "PASS":
            _results[number] = (outcome, title)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        outcome, title = _results[number]
        terminalreporter.write_line(f"criterion {number:2d} {outcome}  {title}")
