from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hahog.depth import HeightField


def make_field(
    rng: np.random.Generator,
    width: int,
    height: int,
    invalid_prob: float = 0.0,
    h_max: float = 2200.0,
) -> HeightField:
    h = rng.uniform(0.0, h_max, size=(height, width))
    valid = rng.random((height, width)) >= invalid_prob
    h = np.where(valid, h, 0.0)
    return HeightField(width=width, height=height, h=h, valid=valid)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
