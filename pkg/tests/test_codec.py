import io

import jpeglib
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from oracles import CHROMA, LUMA, ijg_table, quantize_block
from stegochannel.corpus import camera_jpeg
from stegochannel.errors import MalformedStream, UnsupportedCoding
from stegochannel.jpeg import (CoefficientImage, Component, PixelImage, QuantTable, compress, decode,
                               decompress, encode, standard_tables)
from stegochannel.jpeg.transform import estimate_quality, requantize
from stegochannel.jpeg.types import covered_shape
from strategies import build_image, coefficient_images


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_bytes(data)
    return str(path)


# --- entropy coding round trip ------------------------------------------------

@given(coefficient_images())
def test_round_trip_fuzz(img):
    assert decode(encode(img)) == img


@given(coefficient_images(max_side=24))
def test_encode_deterministic(img):
    assert encode(img) == encode(img)


def test_round_trip_real_photos(photos):
    for _, rgb in photos:
        img = compress(PixelImage.from_rgb(rgb[:300, :400]), 80)
        assert decode(encode(img)) == img


def test_markers(chelsea):
    data = encode(compress(PixelImage.from_rgb(chelsea), 75))
    assert data[:2] == b"\xff\xd8" and data[-2:] == b"\xff\xd9"


def test_extreme_values_round_trip():
    img = build_image(7, 33, 17, 3, (2, 2), density=1.0, scale=500.0, extremes=True)
    assert decode(encode(img)) == img


# --- malformed / unsupported ----------------------------------------------------

def test_missing_eoi(chelsea):
    data = encode(compress(PixelImage.from_rgb(chelsea), 75))
    with pytest.raises(MalformedStream):
        decode(data[:-2])


def test_truncated_scan(chelsea):
    data = encode(compress(PixelImage.from_rgb(chelsea), 75))
    with pytest.raises(MalformedStream):
        decode(data[: len(data) // 2])


@pytest.mark.parametrize("data", [b"", b"\xff", b"GIF89a", b"\xff\xd8\xff\xd9"])
def test_garbage_rejected(data):
    with pytest.raises(MalformedStream):
        decode(data)


@given(st.binary(max_size=200))
def test_random_bytes_never_crash(blob):
    try:
        decode(b"\xff\xd8" + blob)
    except (MalformedStream, UnsupportedCoding):
        pass


def test_progressive_rejected(chelsea):
    buf = io.BytesIO()
    Image.fromarray(chelsea).save(buf, format="JPEG", progressive=True)
    with pytest.raises(UnsupportedCoding):
        decode(buf.getvalue())


# --- independent reference codec (libjpeg via jpeglib) ----------------------------

def _reference_images(photos):
    """20 files produced by libjpeg (Pillow) at assorted qualities and samplings."""
    out = []
    for i, (_, rgb) in enumerate(photos):
        for sub in (0, 2):
            buf = io.BytesIO()
            Image.fromarray(rgb[: 200 + 37 * i, : 300 + 11 * i]).save(
                buf, format="JPEG", quality=60 + 3 * i, subsampling=sub)
            out.append(buf.getvalue())
    return out[:20]


def test_decode_matches_reference_coefficients(photos, tmp_path):
    files = _reference_images(photos)
    assert len(files) == 20
    for k, data in enumerate(files):
        path = _write(tmp_path, f"ref{k}.jpg", data)
        ref = jpeglib.read_dct(path)
        ours = decode(data)
        dumps = [ref.Y, ref.Cb, ref.Cr]
        for i, (comp, dump) in enumerate(zip(ours.components, dumps)):
            rows, cols = covered_shape(ours.width, ours.height, ours.components, i)
            assert dump.shape[:2] == (rows, cols)
            np.testing.assert_array_equal(comp.blocks[:rows, :cols], dump)
        np.testing.assert_array_equal(ours.quant_tables[0].natural(), ref.qt[0])


def test_decompress_matches_reference_pixels(photos, tmp_path):
    for k, data in enumerate(_reference_images(photos)):
        path = _write(tmp_path, f"px{k}.jpg", data)
        ref = jpeglib.read_spatial(path, out_color_space=jpeglib.JCS_YCbCr,
                                   dct_method=jpeglib.JDCT_ISLOW, flags=["-DO_FANCY_UPSAMPLING"])
        ours = decompress(decode(data)).samples.transpose(1, 2, 0).astype(int)
        assert np.abs(ours - ref.spatial.astype(int)).max() <= 1


def test_reference_decoder_reads_our_output(chelsea, tmp_path):
    img = compress(PixelImage.from_rgb(chelsea), 85)
    ref = jpeglib.read_dct(_write(tmp_path, "ours.jpg", encode(img)))
    rows, cols = ref.Y.shape[:2]
    np.testing.assert_array_equal(img.components[0].blocks[:rows, :cols], ref.Y)


# --- transform -------------------------------------------------------------------

def test_zero_coefficients_mid_gray():
    comp = Component(1, 1, 1, 0, np.zeros((2, 3, 8, 8)))
    img = CoefficientImage(24, 16, (comp,), {0: QuantTable((1,) * 64)})
    assert np.all(decompress(img).samples == 128)


def test_dc_only_is_flat():
    blocks = np.zeros((1, 1, 8, 8))
    blocks[0, 0, 0, 0] = 40
    img = CoefficientImage(8, 8, (Component(1, 1, 1, 0, blocks),), {0: QuantTable((1,) * 64)})
    px = decompress(img).samples
    assert np.all(px == px[0, 0, 0]) and px[0, 0, 0] == 128 + 5


def test_quality_50_tables_are_the_base_tables():
    tables = standard_tables(50)
    assert list(tables[0].natural().reshape(-1)) == LUMA
    assert list(tables[1].natural().reshape(-1)) == CHROMA


@pytest.mark.parametrize("quality", [1, 10, 49, 50, 51, 75, 90, 100])
def test_quality_scaling_matches_formula(quality):
    tables = standard_tables(quality)
    assert list(tables[0].natural().reshape(-1)) == ijg_table(LUMA, quality)
    assert list(tables[1].natural().reshape(-1)) == ijg_table(CHROMA, quality)


@pytest.mark.parametrize("quality", [5, 50, 95])
def test_mid_gray_compresses_to_zero(quality):
    img = compress(PixelImage(np.full((3, 21, 30), 128, dtype=np.uint8)), quality)
    assert all(not c.blocks.any() for c in img.components)


def test_compress_matches_reference_dct(rng):
    pixels = rng.integers(0, 256, size=(8, 8))
    img = compress(PixelImage(pixels[None].astype(np.uint8)), 60)
    table = img.quant_tables[0].natural()
    np.testing.assert_array_equal(img.components[0].blocks[0, 0], quantize_block(pixels, table))


def test_recompression_near_idempotent(photos):
    # measured baseline: a fraction of a percent of coefficients move
    fractions = []
    for _, rgb in photos[:6]:
        a = compress(PixelImage.from_rgb(rgb), 75)
        b = compress(decompress(a), 75)
        fa, fb = a.flat_coefficients(), b.flat_coefficients()
        fractions.append(np.count_nonzero(fa != fb) / fa.size)
    assert max(fractions) < 0.02


def test_estimate_quality_and_requantize(chelsea):
    img = compress(PixelImage.from_rgb(chelsea), 72)
    assert estimate_quality(img) == 72
    assert requantize(img, 72) is img
    assert estimate_quality(requantize(img, 80)) == 80
    assert estimate_quality(decode(camera_jpeg(chelsea, quality=92))) == 92


def test_pixel_image_validation():
    with pytest.raises(ValueError):
        PixelImage(np.zeros((2, 4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        PixelImage(np.full((1, 4, 4), 300))
    gray = PixelImage.from_rgb(np.zeros((5, 6), dtype=np.uint8))
    assert gray.channels == 1 and (gray.width, gray.height) == (6, 5)


def test_coefficient_image_validation():
    with pytest.raises(ValueError):
        CoefficientImage(8, 8, (Component(1, 1, 1, 3, np.zeros((1, 1, 8, 8))),), {0: QuantTable((1,) * 64)})
    with pytest.raises(ValueError):
        CoefficientImage(16, 8, (Component(1, 1, 1, 0, np.zeros((1, 1, 8, 8))),), {0: QuantTable((1,) * 64)})
    with pytest.raises(ValueError):
        QuantTable((0,) * 64)
