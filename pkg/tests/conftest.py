import re

CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_")

# criterion number -> (passed, first test name, details)
_criteria: dict[int, tuple[bool, str, str]] = {}


def pytest_runtest_logreport(report):
    m = CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when != "call" and report.passed:
        return
    key = int(m.group(1))
    name = report.nodeid.split("::")[-1]
    detail = dict(report.user_properties).get("detail", "")
    # a criterion split over several tests passes only if all of them do
    ok, first, details = _criteria.get(key, (True, name, ""))
    details = "; ".join(d for d in (details, detail) if d)
    _criteria[key] = (ok and report.passed, first, details)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria):
        ok, name, detail = _criteria[key]
        line = f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
