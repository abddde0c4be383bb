import pytest

_REPORT = []


@pytest.fixture
def report():
    """Record one acceptance line: report(criterion, passed, detail)."""

    def _add(criterion, passed, detail=""):
        _REPORT.append((criterion, bool(passed), detail))

    return _add


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _REPORT:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {criterion}: {detail}")
