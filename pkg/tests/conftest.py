import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import fixture  # noqa: E402


@pytest.fixture(scope="session")
def scalar():
    return fixture("scalar")


@pytest.fixture(scope="session")
def two_phase():
    return fixture("two_phase")


@pytest.fixture(scope="session")
def symmetric():
    return fixture("scalar_symmetric")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance")
    for key in sorted(mod.LINES, key=lambda k: (int(str(k).rstrip("abc")), str(k))):
        terminalreporter.write_line(mod.LINES[key])
