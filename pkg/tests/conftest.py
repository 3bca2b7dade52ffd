import pytest

from support import ACCEPTANCE_LOG, symmetric_spec


@pytest.fixture
def symmetric():
    return symmetric_spec()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LOG):
        passed, title, detail = ACCEPTANCE_LOG[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
