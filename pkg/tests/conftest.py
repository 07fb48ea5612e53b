import time

import pytest

_RESULTS = {}
_START = time.monotonic()


@pytest.fixture(scope="session")
def acceptance_log():
    """record(number, title, passed, detail) keeps one line per criterion."""

    def record(number, title, passed, detail):
        _RESULTS[number] = (title, bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")

    return record


@pytest.fixture(scope="session")
def session_start():
    return _START


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
