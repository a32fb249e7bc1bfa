import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_results: dict[int, str] = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    number = int(match.group(1))
    if report.when == "call":
        _results[number] = report.outcome
    elif report.failed:  # setup or teardown error
        _results[number] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        status = "PASS" if _results[number] == "passed" else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number}: {status}")
