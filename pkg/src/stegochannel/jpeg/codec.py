"""Baseline JPEG marker parsing and writing at the quantized-coefficient level."""

from __future__ import annotations

import math
import struct

import numpy as np

from ..errors import MalformedStream, UnsupportedCoding
from . import entropy
from .entropy import HuffmanSpec
from .tables import (AC_CHROMA_BITS, AC_CHROMA_VALS, AC_LUMA_BITS, AC_LUMA_VALS,
                     DC_CHROMA_BITS, DC_CHROMA_VALS, DC_LUMA_BITS, DC_LUMA_VALS,
                     NATURAL_TO_ZIGZAG, ZIGZAG)
from .types import CoefficientImage, Component, QuantTable, covered_shape, grid_shape

SOI = b"\xff\xd8"
EOI = b"\xff\xd9"
EXIF_ID = b"Exif\x00\x00"
JFIF_APP0 = b"\xff\xe0" + struct.pack(">H", 16) + b"JFIF\x00" + bytes([1, 1, 0, 0, 1, 0, 1, 0, 0])

_STANDARD_DC = (HuffmanSpec(DC_LUMA_BITS, DC_LUMA_VALS), HuffmanSpec(DC_CHROMA_BITS, DC_CHROMA_VALS))
_STANDARD_AC = (HuffmanSpec(AC_LUMA_BITS, AC_LUMA_VALS), HuffmanSpec(AC_CHROMA_BITS, AC_CHROMA_VALS))

_UNSUPPORTED_SOF = {
    0xC2: "progressive DCT", 0xC3: "lossless", 0xC5: "differential sequential",
    0xC6: "differential progressive", 0xC7: "differential lossless",
    0xC9: "arithmetic sequential", 0xCA: "arithmetic progressive",
    0xCB: "arithmetic lossless", 0xCD: "arithmetic differential sequential",
    0xCE: "arithmetic differential progressive", 0xCF: "arithmetic differential lossless",
}

_STATUS_MESSAGES = {
    entropy.BAD_CODE: "invalid Huffman code",
    entropy.TRUNCATED: "entropy-coded data truncated",
    entropy.BAD_RESTART: "missing restart marker",
    entropy.BAD_RUN: "AC run exceeds block",
}


def _scan_order(width, height, components, offsets, scan_indices):
    """Rows of the concatenated block array in scan order, plus scan-slot ids."""
    if len(scan_indices) == 1:
        ci = scan_indices[0]
        rows, cols = covered_shape(width, height, components, ci)
        stride = components[ci].blocks.shape[1]
        r = np.arange(rows)[:, None] * stride + np.arange(cols)[None, :]
        order = offsets[ci] + r.reshape(-1)
        return order.astype(np.int64), np.zeros(order.size, dtype=np.int64), 1
    hmax = max(c.h for c in components)
    vmax = max(c.v for c in components)
    mcux = math.ceil(width / (8 * hmax))
    mcuy = math.ceil(height / (8 * vmax))
    parts, slots = [], []
    for sl, ci in enumerate(scan_indices):
        c = components[ci]
        stride = mcux * c.h
        my = np.arange(mcuy)[:, None, None, None]
        mx = np.arange(mcux)[None, :, None, None]
        yy = np.arange(c.v)[None, None, :, None]
        xx = np.arange(c.h)[None, None, None, :]
        r = (my * c.v + yy) * stride + mx * c.h + xx
        parts.append(offsets[ci] + r.reshape(mcuy * mcux, c.v * c.h))
        slots.append(np.full((mcuy * mcux, c.v * c.h), sl))
    order = np.concatenate(parts, axis=1).reshape(-1)
    slot = np.concatenate(slots, axis=1).reshape(-1)
    per_mcu = sum(components[ci].h * components[ci].v for ci in scan_indices)
    return order.astype(np.int64), slot.astype(np.int64), per_mcu


class _Frame:
    def __init__(self, width, height, comps):
        self.width = width
        self.height = height
        self.comps = comps  # list of dicts: id, h, v, tq


class _GridStub:
    def __init__(self, h, v, shape):
        self.h = h
        self.v = v
        self.blocks = np.empty(shape + (0, 0))


def decode(data: bytes) -> CoefficientImage:
    """Parse a baseline JPEG into quantized coefficients (no dequantization, no IDCT)."""
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    n = buf.size
    if n < 4 or bytes(buf[:2]) != SOI:
        raise MalformedStream("missing SOI marker")
    qtables = {}
    dc_specs, ac_specs = {}, {}
    frame = None
    out = None
    offsets = None
    stubs = None
    exif = None
    restart = 0
    pos = 2
    seen_eoi = False
    while pos < n:
        if buf[pos] != 0xFF:
            raise MalformedStream(f"expected marker at offset {pos}")
        while pos < n and buf[pos] == 0xFF:
            pos += 1
        if pos >= n:
            break
        marker = int(buf[pos])
        pos += 1
        if marker == 0xD9:
            seen_eoi = True
            break
        if 0xD0 <= marker <= 0xD7 or marker == 0x01:
            continue
        if pos + 2 > n:
            raise MalformedStream("truncated segment header")
        length = int(buf[pos]) << 8 | int(buf[pos + 1])
        if length < 2 or pos + length > n:
            raise MalformedStream(f"segment 0x{marker:02X} overruns stream")
        seg = bytes(buf[pos + 2:pos + length])
        pos += length
        if marker == 0xE1 and seg.startswith(EXIF_ID):
            exif = seg
        elif marker == 0xDB:
            _parse_dqt(seg, qtables)
        elif marker == 0xC4:
            _parse_dht(seg, dc_specs, ac_specs)
        elif marker == 0xDD:
            if len(seg) != 2:
                raise MalformedStream("bad DRI segment")
            restart = seg[0] << 8 | seg[1]
        elif marker in (0xC0, 0xC1):
            if frame is not None:
                raise MalformedStream("multiple frames")
            frame = _parse_sof(seg)
            comps = frame.comps
            stubs = []
            for c in comps:
                stubs.append(_GridStub(c["h"], c["v"], (0, 0)))
            shapes = [grid_shape(frame.width, frame.height, stubs, i) for i in range(len(comps))]
            stubs = [_GridStub(c["h"], c["v"], s) for c, s in zip(comps, shapes)]
            sizes = [r * c for r, c in shapes]
            offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
            out = np.zeros((sum(sizes), 64), dtype=np.int16)
        elif marker in _UNSUPPORTED_SOF:
            raise UnsupportedCoding(f"{_UNSUPPORTED_SOF[marker]} JPEG is not supported")
        elif marker == 0xCC:
            raise UnsupportedCoding("arithmetic coding is not supported")
        elif marker == 0xDA:
            if frame is None:
                raise MalformedStream("SOS before SOF")
            pos = _decode_scan(buf, pos, seg, frame, stubs, offsets, out, dc_specs, ac_specs, restart)
    if not seen_eoi:
        raise MalformedStream("missing EOI marker")
    if frame is None:
        raise MalformedStream("no frame header")
    components = []
    for i, c in enumerate(frame.comps):
        if c["tq"] not in qtables:
            raise MalformedStream(f"quant table {c['tq']} not defined")
        rows, cols = stubs[i].blocks.shape[:2]
        start = offsets[i]
        zz = out[start:start + rows * cols]
        blocks = zz[:, NATURAL_TO_ZIGZAG].reshape(rows, cols, 8, 8)
        components.append(Component(c["id"], c["h"], c["v"], c["tq"], blocks))
    used = {c["tq"] for c in frame.comps}
    tables = {k: v for k, v in qtables.items() if k in used}
    try:
        return CoefficientImage(frame.width, frame.height, tuple(components), tables, exif)
    except ValueError as exc:
        raise MalformedStream(str(exc)) from exc


def _parse_dqt(seg, qtables):
    i = 0
    while i < len(seg):
        pq, tq = seg[i] >> 4, seg[i] & 15
        if pq != 0:
            raise UnsupportedCoding("16-bit quantization tables are not baseline")
        if i + 65 > len(seg):
            raise MalformedStream("truncated DQT")
        entries = tuple(seg[i + 1:i + 65])
        if min(entries) == 0:
            raise MalformedStream("zero quantizer step")
        qtables[tq] = QuantTable(entries)
        i += 65


def _parse_dht(seg, dc_specs, ac_specs):
    i = 0
    while i < len(seg):
        if i + 17 > len(seg):
            raise MalformedStream("truncated DHT")
        tc, th = seg[i] >> 4, seg[i] & 15
        bits = tuple(seg[i + 1:i + 17])
        total = sum(bits)
        if i + 17 + total > len(seg):
            raise MalformedStream("truncated DHT")
        vals = tuple(seg[i + 17:i + 17 + total])
        try:
            spec = HuffmanSpec(bits, vals)
        except ValueError as exc:
            raise MalformedStream(str(exc)) from exc
        (dc_specs if tc == 0 else ac_specs)[th] = spec
        i += 17 + total


def _parse_sof(seg):
    if len(seg) < 6:
        raise MalformedStream("truncated SOF")
    precision = seg[0]
    height, width = struct.unpack(">HH", seg[1:5])
    nf = seg[5]
    if precision != 8:
        raise UnsupportedCoding(f"{precision}-bit samples are not supported")
    if height == 0:
        raise UnsupportedCoding("DNL-defined height is not supported")
    if width == 0:
        raise MalformedStream("zero image width")
    if nf not in (1, 3):
        raise UnsupportedCoding(f"{nf}-component images are not supported")
    if len(seg) < 6 + 3 * nf:
        raise MalformedStream("truncated SOF")
    comps = []
    for k in range(nf):
        cid, hv, tq = seg[6 + 3 * k:9 + 3 * k]
        h, v = hv >> 4, hv & 15
        if h not in (1, 2) or v not in (1, 2):
            raise UnsupportedCoding(f"sampling factors {h}x{v} are not supported")
        comps.append({"id": cid, "h": h, "v": v, "tq": tq})
    return _Frame(width, height, comps)


def _decode_scan(buf, pos, seg, frame, stubs, offsets, out, dc_specs, ac_specs, restart):
    if not seg:
        raise MalformedStream("empty SOS")
    ns = seg[0]
    if len(seg) != 4 + 2 * ns:
        raise MalformedStream("bad SOS length")
    ss, se, ahal = seg[1 + 2 * ns:4 + 2 * ns]
    if ss != 0 or se != 63 or ahal != 0:
        raise UnsupportedCoding("spectral selection / successive approximation is not baseline")
    ids = [c["id"] for c in frame.comps]
    scan_indices, dc_ids, ac_ids = [], [], []
    for k in range(ns):
        cid, tt = seg[1 + 2 * k], seg[2 + 2 * k]
        if cid not in ids:
            raise MalformedStream(f"scan references unknown component {cid}")
        scan_indices.append(ids.index(cid))
        dc_ids.append(tt >> 4)
        ac_ids.append(tt & 15)
    specs, index = [], {}
    dc_tab, ac_tab = [], []
    for kind, table_ids, registry, dest in (("dc", dc_ids, dc_specs, dc_tab), ("ac", ac_ids, ac_specs, ac_tab)):
        for t in table_ids:
            if t not in registry:
                raise MalformedStream(f"undefined {kind.upper()} Huffman table {t}")
            key = (kind, t)
            if key not in index:
                index[key] = len(specs)
                specs.append(registry[t])
            dest.append(index[key])
    _, _, lut_sym, lut_len = entropy.stack_tables(specs)
    order, slot, per_mcu = _scan_order(frame.width, frame.height, stubs, offsets, scan_indices)
    status, end = entropy.decode_scan(
        buf, pos, out, order, slot, np.array(dc_tab, dtype=np.int64), np.array(ac_tab, dtype=np.int64),
        lut_sym, lut_len, per_mcu, restart, len(scan_indices))
    if status != entropy.OK:
        raise MalformedStream(_STATUS_MESSAGES.get(status, f"entropy decode error {status}"))
    # skip to the next real marker (not stuffing, not RSTn)
    n = buf.size
    p = end
    while p + 1 < n:
        if buf[p] == 0xFF and buf[p + 1] != 0 and not (0xD0 <= buf[p + 1] <= 0xD7):
            return p
        p += 1
    raise MalformedStream("missing EOI marker")


def _segment(marker, payload):
    return bytes([0xFF, marker]) + struct.pack(">H", len(payload) + 2) + payload


def encode(img: CoefficientImage) -> bytes:
    """Write a baseline JFIF stream with the standard Huffman tables. Never writes EXIF."""
    comps = img.components
    parts = [SOI, JFIF_APP0]
    dqt = b"".join(bytes([tid]) + bytes(img.quant_tables[tid].entries)
                   for tid in sorted(img.quant_tables))
    parts.append(_segment(0xDB, dqt))
    sof = struct.pack(">BHHB", 8, img.height, img.width, len(comps))
    sof += b"".join(bytes([c.id, c.h << 4 | c.v, c.table_id]) for c in comps)
    parts.append(_segment(0xC0, sof))
    n_classes = 1 if len(comps) == 1 else 2
    dht = b""
    for tc, std in ((0, _STANDARD_DC), (1, _STANDARD_AC)):
        for th in range(n_classes):
            dht += bytes([tc << 4 | th]) + bytes(std[th].bits) + bytes(std[th].vals)
    parts.append(_segment(0xC4, dht))
    table_class = [0 if i == 0 else 1 for i in range(len(comps))]
    sos = bytes([len(comps)])
    sos += b"".join(bytes([c.id, t << 4 | t]) for c, t in zip(comps, table_class))
    sos += bytes([0, 63, 0])
    parts.append(_segment(0xDA, sos))
    parts.append(_entropy_code(img, table_class, n_classes))
    parts.append(EOI)
    return b"".join(parts)


def _entropy_code(img, table_class, n_classes):
    comps = img.components
    zz = np.concatenate([c.blocks.reshape(-1, 64)[:, ZIGZAG] for c in comps])
    sizes = [c.blocks.shape[0] * c.blocks.shape[1] for c in comps]
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    order, slot, _ = _scan_order(img.width, img.height, comps, offsets, list(range(len(comps))))
    specs = list(_STANDARD_DC[:n_classes]) + list(_STANDARD_AC[:n_classes])
    codes, code_sizes, _, _ = entropy.stack_tables(specs)
    dc_tab = np.array(table_class, dtype=np.int64)
    ac_tab = dc_tab + n_classes
    capacity = 64 * order.size + 1024
    while True:
        out = np.empty(capacity, dtype=np.uint8)
        status, length = entropy.encode_scan(
            zz, order, slot, dc_tab, ac_tab, codes, code_sizes, len(comps), out)
        if status == entropy.OK:
            return out[:length].tobytes()
        if status != entropy.OVERFLOW:
            raise ValueError(f"coefficients not encodable with baseline tables (status {status})")
        capacity = 2 * capacity + 4096


def insert_after_app0(jpeg: bytes, marker: int, payload: bytes) -> bytes:
    """Splice an APPn segment in directly after SOI/APP0."""
    if not jpeg.startswith(SOI):
        raise MalformedStream("missing SOI marker")
    cut = 2
    if jpeg[2:4] == b"\xff\xe0":
        cut = 4 + (jpeg[4] << 8 | jpeg[5])
    return jpeg[:cut] + _segment(marker, payload) + jpeg[cut:]
