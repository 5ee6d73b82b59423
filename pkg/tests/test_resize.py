import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stegochannel.jpeg import PixelImage, resize
from stegochannel.jpeg.resize import target_size


def test_4096x3072_to_2048():
    assert target_size(4096, 3072, 2048) == (2048, 1536)


def test_within_cap_unchanged():
    img = PixelImage(np.random.default_rng(0).integers(0, 256, (3, 600, 800), dtype=np.uint8))
    assert resize(img, 960) is img


def test_portrait():
    assert target_size(3000, 4000, 2048) == (1536, 2048)


@given(st.integers(1, 4000), st.integers(1, 4000), st.integers(1, 3000))
def test_target_size_laws(w, h, cap):
    nw, nh = target_size(w, h, cap)
    assert max(nw, nh) == min(max(w, h), cap)
    assert nw >= 1 and nh >= 1
    # short side is rounded to the nearest pixel (or clamped to 1)
    assert abs(nw * h - nh * w) <= 0.5 * max(w, h) or min(nw, nh) == 1


@given(st.integers(0, 255), st.integers(9, 120), st.integers(9, 120), st.integers(8, 60))
def test_constant_stays_constant(value, w, h, cap):
    img = PixelImage(np.full((3, h, w), value, dtype=np.uint8))
    out = resize(img, cap)
    assert np.all(out.samples == value)


@given(st.integers(1, 64), st.integers(1, 64))
def test_never_enlarges(w, h):
    img = PixelImage(np.zeros((1, h, w), dtype=np.uint8))
    assert resize(img, 64) is img


def test_deterministic_and_bounded(chelsea):
    img = PixelImage.from_rgb(chelsea)
    a, b = resize(img, 200), resize(img, 200)
    assert a == b and (a.width, a.height) == target_size(img.width, img.height, 200)
    # a smoothing filter cannot leave the input range
    assert a.samples.min() >= img.samples.min() and a.samples.max() <= img.samples.max()


def test_bad_target():
    with pytest.raises(ValueError):
        target_size(10, 10, 0)
