import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    for key, value in report.user_properties:
        if key == "acceptance" and report.when == "call":
            _ACCEPTANCE[value["number"]] = value
    if report.when == "call" and report.failed and "test_acceptance.py::test_criterion" in report.nodeid:
        # a crash before the property was recorded still counts as a failure
        number = int(report.nodeid.rsplit("criterion_", 1)[1].rstrip("]"))
        _ACCEPTANCE.setdefault(number, {"number": number, "title": "", "passed": False,
                                        "detail": "raised before reporting"})


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        v = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if v['passed'] else 'FAIL'}] {number}. {v['title']}: {v['detail']}")
