import re
from collections import OrderedDict

_results: "OrderedDict[int, list]" = OrderedDict()
_CRITERION = re.compile(r"test_c(\d+)_")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    detail = "; ".join(f"{k}={v}" for k, v in report.user_properties)
    name = report.nodeid.split("::")[-1]
    _results.setdefault(int(match.group(1)), []).append((name, report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        parts = _results[number]
        ok = all(passed for _, passed, _ in parts)
        details = [detail for _, _, detail in parts if detail]
        failed = [name for name, passed, _ in parts if not passed]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}"
        if details:
            line += "  " + "; ".join(details)
        if failed:
            line += "  | failed: " + ", ".join(failed)
        terminalreporter.write_line(line)
