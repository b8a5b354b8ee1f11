import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(n: int, ok: bool, detail: str, seconds: float | None = None) -> None:
        took = f" [{seconds:.1f}s]" if seconds is not None else ""
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}{took}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
