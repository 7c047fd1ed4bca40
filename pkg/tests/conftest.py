import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.sphere_lattice import enumerate_shell  # noqa: E402


@pytest.fixture(scope="session")
def shell_2_25():
    return enumerate_shell(2, 25)


@pytest.fixture(scope="session")
def shell_4_4():
    return enumerate_shell(4, 4)
