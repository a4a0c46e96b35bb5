import pytest

_LINES = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Store one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, {})

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
