from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
_ACCEPTANCE = []


def record_acceptance(number, passed, detail=""):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
    _ACCEPTANCE.append((number, line))
    print(line)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
