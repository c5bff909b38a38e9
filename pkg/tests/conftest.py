import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; printed live and again in the terminal summary."""

    def emit(n, ok, text):
        line = f"ACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {text}"
        _LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
