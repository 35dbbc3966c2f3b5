import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mars_games.instances import random_mg  # noqa: E402


@pytest.fixture
def small_spec():
    return random_mg(7, 2, 3, (2, 2), (0.8, -1.2)).spec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
