"""Deterministic long-side downscaling (triangle filter, box pre-average past 2x)."""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse

from .types import PixelImage


def target_size(width, height, target_long_side):
    """(width, height) after capping the long side; short side rounded half up, min 1."""
    if target_long_side < 1:
        raise ValueError("target_long_side must be >= 1")
    long_side = max(width, height)
    if long_side <= target_long_side:
        return width, height
    scale = target_long_side / long_side
    if width >= height:
        return target_long_side, max(1, math.floor(height * scale + 0.5))
    return max(1, math.floor(width * scale + 0.5)), target_long_side


def _box_matrix(n_in, k):
    n_out = math.ceil(n_in / k)
    rows = np.repeat(np.arange(n_out), k)[:n_in]
    cols = np.arange(n_in)
    counts = np.bincount(rows, minlength=n_out)
    data = 1.0 / counts[rows]
    return sparse.csr_matrix((data, (rows, cols)), shape=(n_out, n_in))


def _triangle_matrix(n_in, n_out):
    scale = n_in / n_out
    support = max(scale, 1.0)
    centers = (np.arange(n_out) + 0.5) * scale - 0.5
    lo = np.floor(centers - support).astype(int) + 1
    width = int(math.ceil(2 * support)) + 1
    cols = lo[:, None] + np.arange(width)[None, :]
    weights = np.maximum(0.0, 1.0 - np.abs(cols - centers[:, None]) / support)
    weights[(cols < 0) | (cols >= n_in)] = 0.0
    weights /= weights.sum(axis=1, keepdims=True)
    rows = np.repeat(np.arange(n_out), width)
    keep = weights.reshape(-1) > 0
    return sparse.csr_matrix(
        (weights.reshape(-1)[keep], (rows[keep], cols.reshape(-1)[keep])), shape=(n_out, n_in))


def _axis_matrix(n_in, n_out):
    if n_in == n_out:
        return sparse.identity(n_in, format="csr")
    mat = None
    scale = n_in / n_out
    if scale > 2:
        k = int(scale // 2)
        mat = _box_matrix(n_in, k)
        n_in = mat.shape[0]
    tri = _triangle_matrix(n_in, n_out)
    return tri if mat is None else (tri @ mat).tocsr()


def resize(img: PixelImage, target_long_side: int) -> PixelImage:
    """Cap the long side at ``target_long_side`` preserving aspect ratio.

    Images already within the cap are returned unchanged.
    """
    new_w, new_h = target_size(img.width, img.height, target_long_side)
    if (new_w, new_h) == (img.width, img.height):
        return img
    wy = _axis_matrix(img.height, new_h)
    wx = _axis_matrix(img.width, new_w)
    planes = []
    for plane in img.samples.astype(np.float64):
        out = (wx @ (wy @ plane).T).T
        planes.append(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))
    return PixelImage(np.stack(planes))
