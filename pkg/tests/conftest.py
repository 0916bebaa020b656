from pathlib import Path

import pytest

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "pnpec" / "configs"

_ACCEPTANCE = {}


@pytest.fixture
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def acceptance():
    """Record one criterion outcome; lines are printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
