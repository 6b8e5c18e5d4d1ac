import math

import numpy as np
import pytest

from anisolab.schemas.grid import GridFunction, GridSpec
from anisolab.schemas.leaves import LeafFamily, LeafFamilyConfig
from anisolab.services.leaves import horizontal_leaf, make_cone, sample_leaf_family


@pytest.fixture
def grid2d():
    """2D lattice on the default box: N=128 gives n_max = 5."""
    return GridSpec.create(2, 1, 128, math.pi, math.pi / 4)


@pytest.fixture
def grid1d():
    return GridSpec.create(1, 1, 256, 2 * math.pi, math.pi / 2)


@pytest.fixture
def cone():
    return make_cone(1, 1)


@pytest.fixture
def family(grid2d, cone):
    return sample_leaf_family(LeafFamilyConfig(), seed=7, cone=cone, spec=grid2d)


@pytest.fixture
def horizontal_family(cone):
    return LeafFamily(
        leaves=[horizontal_leaf(cone, math.pi)], config=LeafFamilyConfig(), seed=0, translation_step=math.pi / 8,
    )


def plane_wave(spec: GridSpec, frequency) -> GridFunction:
    phase = sum(w * x for w, x in zip(frequency, spec.coordinates()))
    return GridFunction(spec=spec, values=np.exp(1j * phase), kind="plane_wave")


def bump(spec: GridSpec, width: float = 0.09) -> GridFunction:
    """Gaussian at the origin, below 1e-13 outside the support ball."""
    values = np.exp(-spec.radius() ** 2 / (2 * width ** 2))
    return GridFunction(spec=spec, values=values, kind="gaussian", supported=True)
