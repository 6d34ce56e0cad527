from pathlib import Path

import pytest

from ksynth.environment import read_environment

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def toggle():
    return read_environment(FIXTURES / "toggle.json")


@pytest.fixture(scope="session")
def toggle_restricted():
    return read_environment(FIXTURES / "toggle_restricted.json")


@pytest.fixture(scope="session")
def toggle_full():
    return read_environment(FIXTURES / "toggle_full.json")
