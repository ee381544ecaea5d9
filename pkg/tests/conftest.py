import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tcba import ModelParams  # noqa: E402

BA = ModelParams(0.0, 0.0, 0.0, 0.5)
GREEN = ModelParams(1 / 8, 3 / 4, 0.0, 0.3)
ORANGE = ModelParams(1 / 4, 1 / 2, 3 / 4, 0.66)


@pytest.fixture
def ba():
    return BA
