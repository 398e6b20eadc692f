import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end check")


@pytest.fixture(scope="session")
def delaney():
    from probmol.harness import load_registered
    return load_registered("delaney")


@pytest.fixture(scope="session")
def bace():
    from probmol.harness import load_registered
    return load_registered("bace")
