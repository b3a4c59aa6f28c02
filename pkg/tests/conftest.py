import numpy as np
import pytest

from eyefit.headmodel import ParamVector
from eyefit.toymodel import toy_head_asset


@pytest.fixture(scope="session")
def toy_asset():
    return toy_head_asset(seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def random_params(asset, rng, pose_scale=0.0):
    """Draw a plausible parameter vector for the toy asset."""
    return ParamVector(
        rng.normal(size=asset.n_beta),
        rng.normal(size=asset.n_psi),
        rng.uniform(-0.25, 0.25, size=3),
        rng.normal(size=3) * pose_scale,
        rng.normal(size=3) * pose_scale * 10.0,
    )
