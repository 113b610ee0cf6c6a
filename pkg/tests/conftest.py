import pytest

_VERDICTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def verdict():
    """Record a criterion's outcome for the end-of-run summary, then assert it."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        _VERDICTS.append((number, title, bool(passed), detail))
        assert passed, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_VERDICTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status} [{number:2d}] {title}: {detail}")
