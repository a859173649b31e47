import pytest

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record ``(criterion, passed, detail)`` for the end-of-run report."""
    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
