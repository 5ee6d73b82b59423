"""Test-photo corpus assembled from the sample photographs bundled with
scikit-image and scikit-learn.

Only a dozen real photos ship with those packages, so larger corpora are
built as deterministic mosaics of rescaled crops. Each carrier still consists
of natural-photo content (sensor noise, texture, smooth gradients), which is
what the coefficient statistics care about.
"""

from __future__ import annotations

import io
import os
from functools import lru_cache

import numpy as np
from PIL import Image

COLOR_SOURCES = (
    "astronaut.png", "coffee.png", "chelsea.png", "motorcycle_left.png", "motorcycle_right.png",
    "rocket.jpg", "hubble_deep_field.jpg", "retina.jpg", "ihc.png",
)
GRAY_SOURCES = ("camera.png", "moon.png", "brick.png", "grass.png", "gravel.png", "coins.png", "cell.png")


@lru_cache(maxsize=None)
def _load(name):
    if name in ("china.jpg", "flower.jpg"):
        import sklearn.datasets
        root = os.path.join(os.path.dirname(sklearn.datasets.__file__), "images")
    else:
        import skimage.data
        root = os.path.dirname(skimage.data.__file__)
    with Image.open(os.path.join(root, name)) as im:
        return np.asarray(im.convert("L" if name in GRAY_SOURCES else "RGB"))


def color_photos():
    """(name, RGB uint8 array) for every bundled colour photograph."""
    names = COLOR_SOURCES + ("china.jpg", "flower.jpg")
    return [(n.split(".")[0], _load(n)) for n in names]


def gray_photos():
    return [(n.split(".")[0], _load(n)) for n in GRAY_SOURCES]


def _rescale(rgb, factor):
    h, w = rgb.shape[:2]
    size = (max(1, round(w * factor)), max(1, round(h * factor)))
    return np.asarray(Image.fromarray(rgb).resize(size, Image.LANCZOS))


def mosaic(rng, width, height, sources=None):
    """One synthetic carrier: a grid of rescaled crops from real photos."""
    sources = sources or color_photos()
    cols = max(1, round(width / 520))
    rows = max(1, round(height / 420))
    xs = np.linspace(0, width, cols + 1).astype(int)
    ys = np.linspace(0, height, rows + 1).astype(int)
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    for r in range(rows):
        for c in range(cols):
            cw, ch = xs[c + 1] - xs[c], ys[r + 1] - ys[r]
            _, src = sources[rng.integers(len(sources))]
            need = max(cw / src.shape[1], ch / src.shape[0])
            factor = max(need, rng.uniform(0.55, 1.0))
            img = _rescale(src, factor) if abs(factor - 1.0) > 1e-9 else src
            y0 = rng.integers(0, img.shape[0] - ch + 1)
            x0 = rng.integers(0, img.shape[1] - cw + 1)
            tile = img[y0:y0 + ch, x0:x0 + cw]
            if rng.random() < 0.5:
                tile = tile[:, ::-1]
            canvas[ys[r]:ys[r + 1], xs[c]:xs[c + 1]] = tile
    return canvas


ASPECTS = ((4, 3), (3, 2), (16, 9), (1, 1))


def build_corpus(n, long_side, seed=0):
    """``n`` deterministic RGB carriers whose long side is ``long_side``."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        a, b = ASPECTS[rng.integers(len(ASPECTS))]
        short = max(8, round(long_side * b / a))
        w, h = (long_side, short) if rng.random() < 0.8 else (short, long_side)
        out.append((f"mosaic{long_side}_{seed}_{i:03d}", mosaic(rng, w, h)))
    return out


def camera_jpeg(rgb, quality=92, exif=None) -> bytes:
    """Encode with Pillow/libjpeg, standing in for a camera-original upload."""
    buf = io.BytesIO()
    kwargs = {"quality": quality}
    if exif is not None:
        kwargs["exif"] = exif
    Image.fromarray(rgb).save(buf, format="JPEG", **kwargs)
    return buf.getvalue()
