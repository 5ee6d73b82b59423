"""Simulated upload->download pipeline of a photo-sharing platform.

The channel gatekeeps formats, re-encodes everything to baseline JFIF,
caps the long side and requantizes, optionally with a per-transmission
quality jitter drawn from the seed.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .errors import EmptyInput, FormatRejected
from .jpeg import compress, decode, decompress, encode, resize
from .jpeg.codec import insert_after_app0
from .jpeg.types import PixelImage

FORMATS = ("JPEG", "PNG", "GIF", "TIFF", "BMP")
MODES = ("high_quality_album", "standard", "downscaling_client")
PROFILE_ENV = "STEGOCHANNEL_PROFILE"

_ALIASES = {"JPG": "JPEG", "JFIF": "JPEG", "TIF": "TIFF"}


def normalize_format(fmt: str) -> str:
    name = fmt.strip().upper().lstrip(".")
    name = _ALIASES.get(name, name)
    if name not in FORMATS:
        raise ValueError(f"unknown image format {fmt!r}; expected one of {FORMATS}")
    return name


@dataclass(frozen=True)
class ResizeRule:
    high_cap: int = 2048
    low_cap: int = 960
    mode: str = "high_quality_album"

    def __post_init__(self):
        if not self.high_cap >= self.low_cap >= 1:
            raise ValueError("need high_cap >= low_cap >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown resize mode {self.mode!r}")

    @property
    def cap(self) -> int:
        # "standard" uploads and clients that re-fetch at the small size both land on the low cap
        return self.high_cap if self.mode == "high_quality_album" else self.low_cap


@dataclass(frozen=True)
class ChannelProfile:
    accepted_formats: frozenset = frozenset({"JPEG", "PNG", "GIF", "TIFF"})
    resize_rule: ResizeRule = field(default_factory=ResizeRule)
    requant_quality: int = 75
    strip_metadata: bool = True
    quality_jitter: int = 0
    output: str = "baseline_jfif"

    def __post_init__(self):
        fmts = frozenset(normalize_format(f) for f in self.accepted_formats)
        object.__setattr__(self, "accepted_formats", fmts)
        if isinstance(self.resize_rule, dict):
            object.__setattr__(self, "resize_rule", ResizeRule(**self.resize_rule))
        if not 1 <= self.requant_quality <= 100:
            raise ValueError("requant_quality must be in [1, 100]")
        if self.quality_jitter < 0:
            raise ValueError("quality_jitter must be >= 0")
        if self.output != "baseline_jfif":
            raise ValueError("the channel only emits baseline JFIF")

    def replace(self, **changes) -> ChannelProfile:
        return dataclasses.replace(self, **changes)

    def with_mode(self, mode: str) -> ChannelProfile:
        return self.replace(resize_rule=dataclasses.replace(self.resize_rule, mode=mode))

    def to_dict(self) -> dict:
        return {
            "accepted_formats": sorted(self.accepted_formats),
            "output": self.output,
            "resize_rule": dataclasses.asdict(self.resize_rule),
            "requant_quality": self.requant_quality,
            "strip_metadata": self.strip_metadata,
            "quality_jitter": self.quality_jitter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChannelProfile:
        jsonschema.validate(data, profile_schema())
        data = dict(data)
        data["accepted_formats"] = frozenset(data.get("accepted_formats", cls.accepted_formats))
        if "resize_rule" in data:
            data["resize_rule"] = ResizeRule(**data["resize_rule"])
        return cls(**data)


def profile_schema() -> dict:
    text = resources.files("stegochannel").joinpath("data/channel_profile.schema.json").read_text()
    return json.loads(text)


def load_profile(path=None) -> ChannelProfile:
    """Load a profile JSON file; falls back to $STEGOCHANNEL_PROFILE, then the defaults."""
    path = path or os.environ.get(PROFILE_ENV)
    if not path:
        return ChannelProfile()
    with open(path) as fh:
        return ChannelProfile.from_dict(json.load(fh))


def effective_quality(profile: ChannelProfile, seed: int) -> int:
    """Requantization quality used for one transmission."""
    if profile.quality_jitter == 0:
        return profile.requant_quality
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(-profile.quality_jitter, profile.quality_jitter + 1))
    return int(np.clip(profile.requant_quality + offset, 1, 100))


def transmit(upload, fmt: str, profile: ChannelProfile, seed: int = 0) -> bytes:
    """Push one image through the channel and return the downloaded JPEG bytes.

    JPEG uploads are given as bytes. PNG/GIF/TIFF uploads must already be
    decoded into a ``PixelImage``; the channel only models their conversion.
    """
    fmt = normalize_format(fmt)
    if fmt not in profile.accepted_formats:
        raise FormatRejected(f"{fmt} uploads are not accepted by this channel")
    exif = None
    if fmt == "JPEG":
        if isinstance(upload, PixelImage):
            pixels = upload
        else:
            coeffs = decode(upload)
            exif = coeffs.exif
            pixels = decompress(coeffs)
    else:
        if not isinstance(upload, PixelImage):
            raise TypeError(f"{fmt} uploads must be supplied as a decoded PixelImage")
        pixels = upload
    pixels = resize(pixels, profile.resize_rule.cap)
    out = encode(compress(pixels, effective_quality(profile, seed)))
    if exif is not None and not profile.strip_metadata:
        out = insert_after_app0(out, 0xE1, exif)
    return out


def size_ratio(upload: bytes, download: bytes) -> float:
    """Upload size over download size."""
    if not upload or not download:
        raise EmptyInput("size_ratio needs two non-empty byte streams")
    return len(upload) / len(download)
