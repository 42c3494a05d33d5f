import os

import pytest

from qpcp import linalg, utils
from qpcp.rng import RandomStream

BASE_PATH = os.path.dirname(os.path.dirname(os.path.realpath(__file__)))
FIXTURES_DIR = os.path.join(BASE_PATH, "fixtures")


def pytest_configure(config):
    utils.set_progress_bar_enabled(False)


@pytest.fixture
def stream():
    return RandomStream(1234, "test")


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def qubit_cap():
    """Restore the global qubit cap after a test changes it."""
    previous = linalg.get_max_qubits()
    yield linalg.set_max_qubits
    linalg.set_max_qubits(previous)
