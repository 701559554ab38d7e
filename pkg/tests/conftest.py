import pytest

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def record_criterion():
    """Record a criterion outcome for the end-of-run summary, then assert it."""

    def record(number, passed, detail):
        ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
