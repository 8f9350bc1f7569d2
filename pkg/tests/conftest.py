import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from netsleep.backends import HighsBackend
from netsleep.testbed import catalog


@pytest.fixture(scope="session")
def eta():
    return catalog("eta")


@pytest.fixture(scope="session")
def alfa():
    return catalog("alfa")


@pytest.fixture(scope="session")
def backend():
    return HighsBackend()
