"""Immutable image containers for the pixel and quantized-coefficient domains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tables import NATURAL_TO_ZIGZAG, ZIGZAG

# Quantized coefficient bounds for 8-bit baseline: AC in category <= 10,
# DC level-shifted range of an 8x8 block of 0..255 samples.
AC_LIMIT = 1023
DC_MIN, DC_MAX = -1024, 1023


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PixelImage:
    """8-bit raster, shape (channels, height, width); 3 channels means YCbCr."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 3 or s.shape[0] not in (1, 3):
            raise ValueError(f"samples must have shape (1|3, H, W), got {s.shape}")
        if s.shape[1] < 1 or s.shape[2] < 1:
            raise ValueError("image must be at least 1x1")
        if s.dtype != np.uint8:
            if np.any(s < 0) or np.any(s > 255):
                raise ValueError("samples must lie in [0, 255]")
        object.__setattr__(self, "samples", _frozen(s, np.uint8))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    def __eq__(self, other):
        if not isinstance(other, PixelImage):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    __hash__ = None

    @classmethod
    def from_rgb(cls, rgb) -> PixelImage:
        """Build a YCbCr image from an (H, W, 3) RGB array, or grayscale from (H, W)."""
        rgb = np.asarray(rgb)
        if rgb.ndim == 2:
            return cls(rgb[None].astype(np.uint8))
        if rgb.ndim != 3 or rgb.shape[2] not in (3, 4):
            raise ValueError(f"expected (H, W, 3) RGB array, got {rgb.shape}")
        return cls(rgb_to_ycbcr(rgb[..., :3]))

    def to_rgb(self) -> np.ndarray:
        if self.channels == 1:
            return np.array(self.samples[0])
        return ycbcr_to_rgb(self.samples)


def rgb_to_ycbcr(rgb):
    """JFIF colour transform, (H, W, 3) RGB -> (3, H, W) uint8 YCbCr."""
    r, g, b = (rgb[..., i].astype(np.float64) for i in range(3))
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    out = np.stack([y, cb, cr])
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def ycbcr_to_rgb(ycc):
    """Inverse JFIF colour transform, (3, H, W) -> (H, W, 3) uint8 RGB."""
    y, cb, cr = (ycc[i].astype(np.float64) for i in range(3))
    cb -= 128.0
    cr -= 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    out = np.stack([r, g, b], axis=-1)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class QuantTable:
    """64 quantizer steps stored in zigzag order."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(int(e) for e in self.entries)
        if len(entries) != 64:
            raise ValueError(f"quant table needs 64 entries, got {len(entries)}")
        if min(entries) < 1 or max(entries) > 255:
            raise ValueError("quant table entries must lie in [1, 255]")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_natural(cls, table) -> QuantTable:
        flat = np.asarray(table).reshape(64)
        return cls(tuple(flat[ZIGZAG]))

    def natural(self) -> np.ndarray:
        """8x8 row-major array of quantizer steps."""
        zz = np.asarray(self.entries, dtype=np.int32)
        return zz[NATURAL_TO_ZIGZAG].reshape(8, 8)


@dataclass(frozen=True, eq=False)
class Component:
    """One colour component: sampling factors and its grid of 8x8 coefficient blocks.

    ``blocks`` has shape (block_rows, block_cols, 8, 8) in natural order.
    """

    id: int
    h: int
    v: int
    table_id: int
    blocks: np.ndarray

    def __post_init__(self):
        if self.h not in (1, 2) or self.v not in (1, 2):
            raise ValueError(f"sampling factors must be 1 or 2, got {self.h}x{self.v}")
        b = np.asarray(self.blocks)
        if b.ndim != 4 or b.shape[2:] != (8, 8):
            raise ValueError(f"blocks must have shape (rows, cols, 8, 8), got {b.shape}")
        object.__setattr__(self, "blocks", _frozen(b, np.int16))

    def with_blocks(self, blocks) -> Component:
        return Component(self.id, self.h, self.v, self.table_id, blocks)

    def __eq__(self, other):
        if not isinstance(other, Component):
            return NotImplemented
        return (
            (self.id, self.h, self.v, self.table_id) == (other.id, other.h, other.v, other.table_id)
            and np.array_equal(self.blocks, other.blocks)
        )

    __hash__ = None


def grid_shape(width, height, components, index):
    """Block grid (rows, cols) a component occupies.

    Multi-component frames use the MCU-padded grid of the interleaved scan;
    single-component frames cover ceil(dim / 8) blocks.
    """
    c = components[index]
    hmax = max(k.h for k in components)
    vmax = max(k.v for k in components)
    if len(components) == 1:
        cw = math.ceil(width * c.h / hmax)
        ch = math.ceil(height * c.v / vmax)
        return math.ceil(ch / 8), math.ceil(cw / 8)
    mcux = math.ceil(width / (8 * hmax))
    mcuy = math.ceil(height / (8 * vmax))
    return mcuy * c.v, mcux * c.h


def covered_shape(width, height, components, index):
    """ceil(dim / 8 / sampling) block grid actually covering the image area."""
    c = components[index]
    hmax = max(k.h for k in components)
    vmax = max(k.v for k in components)
    cw = math.ceil(width * c.h / hmax)
    ch = math.ceil(height * c.v / vmax)
    return math.ceil(ch / 8), math.ceil(cw / 8)


@dataclass(frozen=True, eq=False)
class CoefficientImage:
    """A JPEG held as quantized DCT coefficients; the embedding substrate.

    Equality ignores the EXIF payload: ``encode`` always writes plain JFIF.
    """

    width: int
    height: int
    components: tuple
    quant_tables: dict
    exif: bytes | None = field(default=None)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        comps = tuple(self.components)
        if not comps:
            raise ValueError("at least one component required")
        object.__setattr__(self, "components", comps)
        tables = {int(k): v if isinstance(v, QuantTable) else QuantTable(v)
                  for k, v in dict(self.quant_tables).items()}
        object.__setattr__(self, "quant_tables", tables)
        for i, c in enumerate(comps):
            if c.table_id not in tables:
                raise ValueError(f"component {c.id} references missing quant table {c.table_id}")
            want = grid_shape(self.width, self.height, comps, i)
            if c.blocks.shape[:2] != want:
                raise ValueError(
                    f"component {c.id} grid {c.blocks.shape[:2]} != expected {want}")
            ac = c.blocks.reshape(-1, 64)
            if ac.size:
                if np.abs(ac[:, 1:]).max(initial=0) > AC_LIMIT:
                    raise ValueError("AC coefficient outside baseline range")
                dc = ac[:, 0]
                if dc.min() < DC_MIN or dc.max() > DC_MAX:
                    raise ValueError("DC coefficient outside baseline range")

    @property
    def has_exif(self) -> bool:
        return self.exif is not None

    def table_for(self, component: Component) -> QuantTable:
        return self.quant_tables[component.table_id]

    def with_components(self, components) -> CoefficientImage:
        return CoefficientImage(self.width, self.height, tuple(components),
                                self.quant_tables, self.exif)

    def coefficient_count(self) -> int:
        return sum(c.blocks.size for c in self.components)

    def flat_coefficients(self) -> np.ndarray:
        """All coefficients concatenated: component order, block raster, natural order."""
        return np.concatenate([c.blocks.reshape(-1) for c in self.components])

    def __eq__(self, other):
        if not isinstance(other, CoefficientImage):
            return NotImplemented
        return (
            (self.width, self.height) == (other.width, other.height)
            and self.quant_tables == other.quant_tables
            and len(self.components) == len(other.components)
            and all(a == b for a, b in zip(self.components, other.components))
        )

    __hash__ = None
