"""Pixel <-> coefficient conversion: (de)quantization, 8x8 DCT, chroma resampling."""

from __future__ import annotations

import math

import numpy as np
from scipy.fft import dctn, idctn

from .tables import CHROMA_QUANT, LUMA_QUANT, scaled_table
from .types import CoefficientImage, Component, PixelImage, QuantTable

SUBSAMPLING = {"4:2:0": (2, 2), "4:2:2": (2, 1), "4:4:4": (1, 1)}


def round_half_away(x):
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def _plane_from_blocks(blocks):
    rows, cols = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(rows * 8, cols * 8)


def _blocks_from_plane(plane):
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def decompress(img: CoefficientImage) -> PixelImage:
    """Dequantize, inverse DCT, replicate chroma up to full resolution.

    Output keeps the stored colour space (YCbCr for three components).
    """
    hmax = max(c.h for c in img.components)
    vmax = max(c.v for c in img.components)
    planes = []
    for comp in img.components:
        q = img.table_for(comp).natural().astype(np.float64)
        spatial = idctn(comp.blocks.astype(np.float64) * q, axes=(2, 3), norm="ortho")
        plane = _plane_from_blocks(spatial) + 128.0
        plane = np.clip(np.floor(plane + 0.5), 0, 255).astype(np.uint8)
        plane = np.repeat(np.repeat(plane, vmax // comp.v, axis=0), hmax // comp.h, axis=1)
        planes.append(plane[:img.height, :img.width])
    return PixelImage(np.stack(planes))


def standard_tables(quality: int, channels: int = 3) -> dict:
    """Quant tables for ``quality``: id 0 luminance, id 1 chrominance."""
    tables = {0: QuantTable.from_natural(scaled_table(LUMA_QUANT, quality))}
    if channels == 3:
        tables[1] = QuantTable.from_natural(scaled_table(CHROMA_QUANT, quality))
    return tables


def _pad_edge(plane, height, width):
    ph, pw = height - plane.shape[0], width - plane.shape[1]
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


def compress(img: PixelImage, quality: int, subsampling: str = "4:2:0") -> CoefficientImage:
    """Forward DCT and quantize with the standard tables scaled to ``quality``."""
    if not 1 <= int(quality) <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    tables = standard_tables(int(quality), img.channels)
    w, h = img.width, img.height
    if img.channels == 1:
        factors = [(1, 1)]
    else:
        sh, sv = SUBSAMPLING[subsampling]
        factors = [(sh, sv), (1, 1), (1, 1)]
    hmax = max(f[0] for f in factors)
    vmax = max(f[1] for f in factors)
    if img.channels == 1:
        full_h, full_w = 8 * math.ceil(h / 8), 8 * math.ceil(w / 8)
    else:
        full_h, full_w = 8 * vmax * math.ceil(h / (8 * vmax)), 8 * hmax * math.ceil(w / (8 * hmax))
    components = []
    for i, (ch, cv) in enumerate(factors):
        plane = _pad_edge(img.samples[i].astype(np.int32), full_h, full_w)
        fy, fx = vmax // cv, hmax // ch
        if fy > 1 or fx > 1:
            s = plane.reshape(full_h // fy, fy, full_w // fx, fx).sum(axis=(1, 3))
            n = fy * fx
            plane = (s + n // 2) // n
        table_id = 0 if i == 0 else 1
        q = tables[table_id].natural().astype(np.float64)
        coeffs = dctn(_blocks_from_plane(plane.astype(np.float64) - 128.0), axes=(2, 3), norm="ortho")
        quantized = round_half_away(coeffs / q)
        # baseline AC range; DC cannot leave [-1024, 1016] for 8-bit input
        quantized = np.clip(quantized, -1023, 1023)
        quantized[..., 0, 0] = np.clip(quantized[..., 0, 0], -1024, 1023)
        components.append(Component(i + 1, ch, cv, table_id, quantized.astype(np.int16)))
    return CoefficientImage(w, h, tuple(components), tables)


def estimate_quality(img: CoefficientImage):
    """The quality whose standard tables ``img`` uses, or None."""
    for quality in range(1, 101):
        tables = standard_tables(quality, len(img.components))
        if all(img.table_for(c) == tables[0 if i == 0 else 1] for i, c in enumerate(img.components)):
            return quality
    return None


def requantize(img: CoefficientImage, quality: int) -> CoefficientImage:
    """Map coefficients onto the standard tables at ``quality`` without visiting pixels.

    Returns ``img`` itself when it already uses those tables.
    """
    tables = standard_tables(int(quality), len(img.components))
    ids = [0 if i == 0 else 1 for i in range(len(img.components))]
    if all(img.table_for(c) == tables[t] for c, t in zip(img.components, ids)):
        return img
    comps = []
    for c, t in zip(img.components, ids):
        ratio = img.table_for(c).natural() / tables[t].natural()
        v = round_half_away(c.blocks * ratio)
        v = np.clip(v, -1023, 1023)
        v[..., 0, 0] = np.clip(v[..., 0, 0], -1024, 1023)
        comps.append(Component(c.id, c.h, c.v, t, v.astype(np.int16)))
    return CoefficientImage(img.width, img.height, tuple(comps), tables, img.exif)
