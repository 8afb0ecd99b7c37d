import numpy as np
import pytest

from rangenav.attitude import AttitudeConfig
from rangenav.observability import analysis_truth
from rangenav.pipeline import run_cascade
from rangenav.riccati import RiccatiConfig
from rangenav.scenario import NoiseConfig, WorldConstants, preset, run_truth

DT = 1e-3
T_FULL = 20.0


@pytest.fixture(scope="session")
def world():
    return WorldConstants()


@pytest.fixture(scope="session")
def eight_spec(world):
    return preset("eight", world)


@pytest.fixture(scope="session")
def eight_truth(eight_spec, world):
    return run_truth(eight_spec, world, DT, T_FULL)


@pytest.fixture(scope="session")
def eight_half_truth(eight_spec, world):
    """Truth at dt/2 for the window integrators."""
    return analysis_truth(eight_spec, world, DT, T_FULL)


@pytest.fixture(scope="session")
def noiseless_cascade(eight_spec, world, eight_truth):
    return run_cascade(
        eight_spec,
        world,
        NoiseConfig.noiseless(),
        RiccatiConfig(),
        AttitudeConfig(),
        DT,
        T_FULL,
        truth=eight_truth,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
