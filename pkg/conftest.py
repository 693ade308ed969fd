import math

import pytest

from lz_decoherence.constants import NoiseModel
from lz_decoherence.model import NoiseSpec, SystemParams


@pytest.fixture
def unit_system() -> SystemParams:
    # pi delta^2 / 2v = 1
    return SystemParams(delta=1.0, v=math.pi / 2)


@pytest.fixture
def weak_fast_noise() -> NoiseSpec:
    return NoiseSpec(model=NoiseModel.ornstein_uhlenbeck, amplitude=0.3, tau=0.1, master_seed=7)
