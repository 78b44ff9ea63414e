import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: call with (passed, detail) before asserting.

    ``passed=None`` records a skipped criterion.
    """
    name = request.node.name

    def record(passed, detail):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"{status}  {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
