import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stegochannel.carrier_prep import prepare
from stegochannel.channel import ChannelProfile
from stegochannel.corpus import build_corpus, camera_jpeg, color_photos

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.register_profile("thorough", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def photos():
    return color_photos()


@pytest.fixture(scope="session")
def chelsea(photos):
    return dict(photos)["chelsea"]


@pytest.fixture(scope="session")
def default_profile():
    return ChannelProfile()


@pytest.fixture(scope="session")
def prepared(photos, default_profile):
    """A few real photos driven to the default channel's fixed point (960 class)."""
    out = []
    for name, rgb in photos[:4]:
        img, _ = prepare(camera_jpeg(rgb), default_profile, 960, max_iters=3)
        out.append((name, img))
    return out


@pytest.fixture(scope="session")
def carrier(prepared):
    return prepared[2][1]


@pytest.fixture(scope="session")
def mosaics():
    return build_corpus(3, 640, seed=99)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
