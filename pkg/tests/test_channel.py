import io
import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from stegochannel.channel import (PROFILE_ENV, ChannelProfile, ResizeRule, effective_quality,
                                  load_profile, normalize_format, size_ratio, transmit)
from stegochannel.corpus import camera_jpeg
from stegochannel.errors import EmptyInput, FormatRejected
from stegochannel.jpeg import PixelImage, decode, encode
from stegochannel.jpeg.transform import estimate_quality
from stegochannel.steganalysis import signature_scan


def _exif_blob():
    exif = Image.Exif()
    exif[0x010F] = "TestCam"
    exif[0x0110] = "Model 9"
    return exif.tobytes()


def _is_jfif(data):
    return data[:4] == b"\xff\xd8\xff\xe0" and data[6:11] == b"JFIF\x00"


def _noise(h, w, seed=0):
    return np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)


def test_bmp_rejected(chelsea):
    with pytest.raises(FormatRejected):
        transmit(PixelImage.from_rgb(chelsea), "BMP", ChannelProfile())


def test_bmp_accepted_when_configured(chelsea):
    profile = ChannelProfile(accepted_formats=frozenset(FORMATS_ALL))
    assert _is_jfif(transmit(PixelImage.from_rgb(chelsea), "bmp", profile))


FORMATS_ALL = ("JPEG", "PNG", "GIF", "TIFF", "BMP")


@pytest.mark.parametrize("fmt", ["PNG", "GIF", "TIFF", "png", ".tif"])
def test_other_formats_emerge_as_jfif(chelsea, fmt):
    out = transmit(PixelImage.from_rgb(chelsea), fmt, ChannelProfile())
    assert _is_jfif(out)
    assert estimate_quality(decode(out)) == 75


def test_non_jpeg_needs_pixels(chelsea):
    with pytest.raises(TypeError):
        transmit(b"\x89PNG", "PNG", ChannelProfile())


def test_unknown_format():
    with pytest.raises(ValueError):
        normalize_format("webp")


def test_exif_stripped_and_capped():
    upload = camera_jpeg(_noise(300, 400), exif=_exif_blob())
    assert decode(upload).has_exif
    big = camera_jpeg(np.repeat(np.repeat(_noise(300, 400), 10, axis=0), 10, axis=1), exif=_exif_blob())
    out = decode(transmit(big, "JPEG", ChannelProfile()))
    assert (out.width, out.height) == (2048, 1536)
    assert not out.has_exif
    assert b"Exif\x00\x00" not in transmit(upload, "JPEG", ChannelProfile())


def test_exif_kept_when_not_stripping():
    upload = camera_jpeg(_noise(64, 64), exif=_exif_blob())
    out = transmit(upload, "JPEG", ChannelProfile(strip_metadata=False))
    assert decode(out).exif == decode(upload).exif


def test_downscaling_client_to_960():
    upload = camera_jpeg(np.repeat(_noise(96, 128), 16, axis=0)[:, :, :].repeat(16, axis=1))
    assert decode(upload).width == 2048
    out = decode(transmit(upload, "JPEG", ChannelProfile().with_mode("downscaling_client")))
    assert out.width == 960


def test_standard_mode_uses_low_cap():
    assert ResizeRule(mode="standard").cap == 960
    assert ResizeRule().cap == 2048


def test_already_within_cap_is_still_requantized(chelsea):
    upload = camera_jpeg(chelsea, quality=95)
    out = transmit(upload, "JPEG", ChannelProfile())
    img = decode(out)
    assert (img.width, img.height) == (chelsea.shape[1], chelsea.shape[0])
    assert estimate_quality(img) == 75 and out != upload


def test_trailing_bytes_do_not_survive(chelsea):
    upload = camera_jpeg(chelsea) + b"hidden" * 100
    assert signature_scan(transmit(upload, "JPEG", ChannelProfile())) == []


@given(st.integers(0, 2**32), st.integers(0, 5))
def test_jitter_range_and_determinism(seed, jitter):
    profile = ChannelProfile(quality_jitter=jitter)
    q = effective_quality(profile, seed)
    assert abs(q - 75) <= jitter
    assert q == effective_quality(profile, seed)


def test_jitter_reaches_both_ends():
    profile = ChannelProfile(quality_jitter=2)
    assert {effective_quality(profile, s) for s in range(200)} == {73, 74, 75, 76, 77}


@given(st.integers(8, 96), st.integers(8, 96), st.integers(0, 3), st.integers(0, 1000))
def test_transmit_invariants(w, h, jitter, seed):
    profile = ChannelProfile(quality_jitter=jitter, resize_rule=ResizeRule(64, 32, "standard"))
    upload = camera_jpeg(_noise(h, w, seed))
    out = transmit(upload, "JPEG", profile, seed)
    img = decode(out)
    assert max(img.width, img.height) <= max(w, h)
    assert max(img.width, img.height) == min(max(w, h), 32)
    assert encode(img) == out  # re-parses to the identical stream
    assert transmit(upload, "JPEG", profile, seed) == out


def test_size_ratio_examples():
    a = b"x" * 1560 * 1024
    b = b"y" * 10 * 1024
    assert size_ratio(a, a) == 1.0
    assert size_ratio(a, b) == pytest.approx(156.0)
    assert size_ratio(a, b) * size_ratio(b, a) == pytest.approx(1.0)
    with pytest.raises(EmptyInput):
        size_ratio(b"", a)


def test_profile_file_round_trip(tmp_path, monkeypatch):
    profile = ChannelProfile(requant_quality=82, quality_jitter=1).with_mode("downscaling_client")
    path = tmp_path / "p.json"
    path.write_text(json.dumps(profile.to_dict()))
    assert load_profile(path) == profile
    monkeypatch.setenv(PROFILE_ENV, str(path))
    assert load_profile() == profile
    monkeypatch.delenv(PROFILE_ENV)
    assert load_profile() == ChannelProfile()


def test_shipped_default_profile_matches_defaults():
    from importlib import resources
    data = json.loads(resources.files("stegochannel").joinpath("data/default_profile.json").read_text())
    assert ChannelProfile.from_dict(data) == ChannelProfile()


@pytest.mark.parametrize("bad", [{"requant_quality": 0}, {"quality_jitter": -1}, {"colour": 1},
                                 {"output": "png"}, {"accepted_formats": ["WEBP"]}])
def test_profile_schema_rejects(bad):
    with pytest.raises(jsonschema.ValidationError):
        ChannelProfile.from_dict(bad)


def test_profile_validation():
    with pytest.raises(ValueError):
        ChannelProfile(requant_quality=101)
    with pytest.raises(ValueError):
        ResizeRule(high_cap=100, low_cap=200)
