"""LSB embedding in quantized AC coefficients with a passphrase-keyed order.

On-image layout (normative):

* Positions: every AC coefficient of the image, enumerated component by
  component, blocks in raster order, natural (row-major) index 1..63 within
  a block. Position ``a`` maps to flat index ``(a // 63) * 64 + a % 63 + 1``.
* Order: seed = first 8 bytes of SHA-256(passphrase), big-endian. A
  SplitMix64 generator drives a Fisher-Yates shuffle of ``range(n)``:
  for ``i = n-1 .. 1``: ``j = next() % (i + 1)``, swap ``i, j``.
* Eligible slots: the shuffled positions whose coefficient has ``|c| >= 2``
  and whose block lies wholly inside the image (no MCU padding), kept in
  shuffled order. Neither test looks at pixels, so small requantization
  noise almost never changes the set.
* Bits: header = 32-bit payload length then 32-bit CRC-32 (IEEE) of the
  payload, followed by the payload; every field MSB-first. Each header bit
  takes ``max(redundancy, 5)`` consecutive slots, each payload bit
  ``redundancy`` consecutive slots.
* A bit is stored as the parity of ``|c|``; the sign is kept.

With ``quality_tolerance = J > 0`` the sender also anticipates requantization
at any standard quality within ``J`` of the reference: each written slot
whose magnitude would not map back to itself (with a noise margin) after a
round trip through one of those tables is moved by a multiple of 2 to the
nearest magnitude that does. Only the tables are modelled, not the
platform's pixel rounding, so some noise-driven errors remain.

After writing the bits the sender stabilizes the image: every block whose
slot parities or slot set would not survive one decompress/recompress cycle
at the image's own tables (usually because the block clips at 0 or 255) is
nudged, first by shifting its DC coefficient, then by moving offending slot
magnitudes by 2 (parity kept). The receiver needs none of this.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import zlib
from dataclasses import dataclass
from functools import lru_cache

import numba as nb
import numpy as np
from scipy.fft import dctn, idctn

from .errors import DimensionMismatch, PayloadTooLarge
from .jpeg import decompress
from .jpeg.tables import CHROMA_QUANT, LUMA_QUANT, scaled_table
from .jpeg.transform import estimate_quality, requantize, round_half_away
from .jpeg.types import CoefficientImage

HEADER_BITS = 64
MIN_HEADER_REDUNDANCY = 5
# distance (DCT units) a requantized value must keep from a rounding boundary
ROBUST_MARGIN = 1.0


class Outcome(str, enum.Enum):
    INTACT = "Intact"
    CORRUPTED = "CorruptedRecovered"
    MISMATCH = "KeyOrCarrierMismatch"
    REFUSED = "EmbedRefused"


@dataclass(frozen=True)
class EmbedSpec:
    passphrase: bytes
    redundancy: int = 5
    # debug mode: canonical order instead of the keyed shuffle
    sequential: bool = False
    # quality the carrier was prepared at; extraction maps other tables back onto it
    reference_quality: int | None = None
    # requantization drift (in quality steps) the sender pre-compensates for
    quality_tolerance: int = 0
    # sender-side block stabilization; off gives a pure LSB writer
    stabilize_blocks: bool = True

    def __post_init__(self):
        if isinstance(self.passphrase, str):
            object.__setattr__(self, "passphrase", self.passphrase.encode("utf-8"))
        if self.redundancy < 1 or self.redundancy % 2 == 0:
            raise ValueError("redundancy must be an odd count >= 1")
        if self.quality_tolerance < 0:
            raise ValueError("quality_tolerance must be >= 0")

    @property
    def header_redundancy(self) -> int:
        return max(self.redundancy, MIN_HEADER_REDUNDANCY)

    @property
    def seed(self) -> int:
        return int.from_bytes(hashlib.sha256(self.passphrase).digest()[:8], "big")


@dataclass(frozen=True)
class ExtractOutcome:
    classification: Outcome
    payload: bytes | None = None

    @property
    def intact(self) -> bool:
        return self.classification is Outcome.INTACT


@nb.njit(cache=True)
def _splitmix_shuffle(n, seed):
    perm = np.arange(n, dtype=np.int64)
    state = np.uint64(seed)
    gamma = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)
    s30, s27, s31 = np.uint64(30), np.uint64(27), np.uint64(31)
    for i in range(n - 1, 0, -1):
        state = state + gamma
        z = state
        z = (z ^ (z >> s30)) * m1
        z = (z ^ (z >> s27)) * m2
        z = z ^ (z >> s31)
        j = np.int64(z % np.uint64(i + 1))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return perm


@lru_cache(maxsize=4)
def _keyed_order(n, seed):
    order = _splitmix_shuffle(n, np.uint64(seed))
    order.setflags(write=False)
    return order


def keyed_permutation(n: int, passphrase: bytes) -> np.ndarray:
    """The shuffled order of ``range(n)`` for a passphrase."""
    return _keyed_order(n, EmbedSpec(passphrase).seed)


def _ac_flat_index(a):
    return (a // 63) * 64 + a % 63 + 1


@lru_cache(maxsize=16)
def _slot_order(n_ac, seed, sequential):
    order = np.arange(n_ac) if sequential else _keyed_order(n_ac, seed)
    idx = _ac_flat_index(order)
    idx.setflags(write=False)
    return idx


def _inside_blocks(img, comp):
    hmax = max(c.h for c in img.components)
    vmax = max(c.v for c in img.components)
    rows, cols = comp.blocks.shape[:2]
    fy, fx = 8 * vmax // comp.v, 8 * hmax // comp.h
    return (((np.arange(rows)[:, None] + 1) * fy <= img.height)
            & ((np.arange(cols)[None, :] + 1) * fx <= img.width))


def _slot_mask(blocks):
    slot = np.abs(blocks) >= 2
    slot[..., 0, 0] = False
    return slot


def eligible_mask(img: CoefficientImage) -> np.ndarray:
    """Boolean mask over ``img.flat_coefficients()`` of embeddable coefficients."""
    masks = []
    for comp in img.components:
        slot = _slot_mask(comp.blocks) & _inside_blocks(img, comp)[:, :, None, None]
        masks.append(slot.reshape(-1))
    return np.concatenate(masks)


def _roundtrip(blocks, q):
    """Blocks after one decompress/recompress cycle with the same table."""
    px = idctn(blocks * q, axes=(-2, -1), norm="ortho") + 128.0
    px = np.clip(np.floor(px + 0.5), 0, 255) - 128.0
    return round_half_away(dctn(px, axes=(-2, -1), norm="ortho") / q)


def _readout_kept(t, r):
    same_set = _slot_mask(t) == _slot_mask(r)
    same_par = ~_slot_mask(t) | ((np.abs(r).astype(np.int64) & 1) == (np.abs(t).astype(np.int64) & 1))
    return (same_set & same_par).all(axis=(-2, -1))


_DC_SHIFTS = [0] + [s * m for m in range(1, 25) for s in (-1, 1)]


def _dc_search(cand, q, done):
    for k in _DC_SHIFTS:
        todo = np.nonzero(~done)[0]
        if todo.size == 0:
            break
        t = cand[todo].copy()
        t[:, 0, 0] = np.clip(t[:, 0, 0] + k, -1024, 1023)
        ok = _readout_kept(t, _roundtrip(t, q))
        cand[todo[ok]] = t[ok]
        done[todo[ok]] = True


def _precompensate(t, q):
    r = _roundtrip(t, q)
    slot = _slot_mask(t)
    mag, rmag = np.abs(t), np.abs(r)
    wrong = slot & (((rmag.astype(np.int64) & 1) != (mag.astype(np.int64) & 1)) | (rmag < 2))
    # move against the drift by 2 so the parity is unchanged
    pushed = np.where(rmag > mag, mag - 2, mag + 2)
    pushed = np.where(pushed < 2, mag + 2, np.minimum(pushed, 1023 - (1023 - mag) % 2))
    t = np.where(wrong, np.sign(t) * pushed, t)
    grown = ~slot & _slot_mask(r)
    return np.where(grown, 0.0, t)


@lru_cache(maxsize=1)
def _basis():
    """Row k: the 8x8 pixel pattern of a unit coefficient at natural position k."""
    return idctn(np.eye(64).reshape(64, 8, 8), axes=(-2, -1), norm="ortho").reshape(64, 64)


def _overshoot(px):
    return np.maximum(px - 127.0, 0).sum(-1) + np.maximum(-128.0 - px, 0).sum(-1)


def _declip(t, q, steps=64):
    """Greedily pull a clipping block back into range without touching its readout.

    Allowed moves keep the slot set and every slot's parity: slot magnitudes
    step by 2 (staying >= 2), other AC values move within {-1, 0, 1} and the
    DC moves by 1.
    """
    basis = _basis()
    qf = q.reshape(64)
    c = t.reshape(64).copy()
    slot = _slot_mask(t).reshape(64)
    idx = np.repeat(np.arange(64), 2)
    delta = np.tile([1.0, -1.0], 64) * np.where(slot[idx], 2.0, 1.0)
    moves = delta[:, None] * qf[idx, None] * basis[idx]
    for _ in range(steps):
        px = c * qf @ basis
        now = _overshoot(px)
        if now == 0:
            break
        nv = c[idx] + delta
        legal = np.where(slot[idx], (np.abs(nv) >= 2) & (np.sign(nv) == np.sign(c[idx])) & (np.abs(nv) <= 1023),
                         (idx == 0) | (np.abs(nv) <= 1))
        cost = np.where(legal, _overshoot(px + moves), np.inf)
        best = int(np.argmin(cost))
        if cost[best] >= now:
            break
        c[idx[best]] += delta[best]
    return c.reshape(8, 8)


def _fix_blocks(cand, q, done, rounds):
    _dc_search(cand, q, done)
    for _ in range(rounds):
        rest = np.nonzero(~done)[0]
        if rest.size == 0:
            break
        sub = _precompensate(cand[rest], q)
        sub_done = np.zeros(len(sub), dtype=bool)
        _dc_search(sub, q, sub_done)
        cand[rest] = sub
        done[rest[sub_done]] = True


def stabilize(img: CoefficientImage, rounds: int = 6):
    """Make every inside block keep its readout through one recompression.

    Returns ``(image, n_unstable)``; ``n_unstable`` counts blocks that could
    not be fixed.
    """
    comps, unstable = [], 0
    for comp in img.components:
        q = img.table_for(comp).natural().astype(np.float64)
        b = comp.blocks.astype(np.float64)
        inside = _inside_blocks(img, comp)
        bad = np.nonzero(inside & ~_readout_kept(b, _roundtrip(b, q)))
        if bad[0].size == 0:
            comps.append(comp)
            continue
        cand = b[bad]
        done = np.zeros(len(cand), dtype=bool)
        _fix_blocks(cand, q, done, rounds)
        rest = np.nonzero(~done)[0]
        if rest.size:
            # usually clipping: restart those from the original, pulled into range
            retry = np.stack([_declip(t, q) for t in b[bad][rest]])
            retry_done = np.zeros(len(rest), dtype=bool)
            _fix_blocks(retry, q, retry_done, rounds)
            cand[rest[retry_done]] = retry[retry_done]
            done[rest[retry_done]] = True
        unstable += int(np.count_nonzero(~done))
        b = b.copy()
        b[bad] = cand
        comps.append(comp.with_blocks(b.astype(np.int16)))
    return img.with_components(comps), unstable


def eligible_slots(img: CoefficientImage, spec: EmbedSpec) -> np.ndarray:
    """Flat coefficient indices usable for embedding, in embedding order."""
    n_ac = img.coefficient_count() // 64 * 63
    idx = _slot_order(n_ac, spec.seed, spec.sequential)
    return idx[eligible_mask(img)[idx]]


def _capacity_from_slots(n_slots, spec):
    free = n_slots - HEADER_BITS * spec.header_redundancy
    return max(0, free // (8 * spec.redundancy))


def capacity(carrier: CoefficientImage, spec: EmbedSpec) -> int:
    """Payload bytes that fit after the header, at the spec's redundancy."""
    return _capacity_from_slots(int(np.count_nonzero(eligible_mask(carrier))), spec)


def _bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def _header(payload: bytes) -> bytes:
    return len(payload).to_bytes(4, "big") + zlib.crc32(payload).to_bytes(4, "big")


def _table_per_coefficient(img):
    return np.concatenate([np.broadcast_to(img.table_for(c).natural().reshape(64), (c.blocks.size // 64, 64))
                           .reshape(-1) for c in img.components])


def _component_per_coefficient(img):
    return np.concatenate([np.full(c.blocks.size, i) for i, c in enumerate(img.components)])


def _survives(m, q, q2):
    """Magnitude ``m`` at step ``q`` comes back unchanged via step ``q2``."""
    x = m * q / q2
    r = np.floor(x + 0.5)
    clear = np.abs(x - r) <= 0.5 - ROBUST_MARGIN / q2
    return clear & (np.floor(r * q2 / q + 0.5) == m)


def _robustify(flat, img, slots, quality, tolerance):
    """Move written magnitudes by multiples of 2 so they survive nearby tables."""
    q = _table_per_coefficient(img)[slots].astype(np.float64)
    chroma = _component_per_coefficient(img)[slots] > 0
    pos = slots % 64
    others = []
    for d in range(-tolerance, tolerance + 1):
        if d and 1 <= quality + d <= 100:
            luma = scaled_table(LUMA_QUANT, quality + d).reshape(64)[pos]
            chrom = scaled_table(CHROMA_QUANT, quality + d).reshape(64)[pos]
            others.append(np.where(chroma, chrom, luma).astype(np.float64))
    values = flat[slots].astype(np.int64)
    mag = np.abs(values)
    chosen = np.full(mag.shape, -1)
    for offset in (0, -2, 2, -4, 4, -6, 6):
        m = mag + offset
        good = (chosen < 0) & (m >= 2) & (m <= 1023)
        for q2 in others:
            good &= _survives(m, q, q2)
        chosen = np.where(good, m, chosen)
    mag = np.where(chosen >= 0, chosen, mag)
    flat[slots] = np.where(values < 0, -mag, mag)


def _unflatten(img, flat):
    comps, start = [], 0
    for c in img.components:
        size = c.blocks.size
        comps.append(c.with_blocks(flat[start:start + size].reshape(c.blocks.shape)))
        start += size
    return img.with_components(comps)


def embed(carrier: CoefficientImage, payload: bytes, spec: EmbedSpec) -> CoefficientImage:
    """Hide ``payload``; only magnitude LSBs of eligible coefficients change."""
    payload = bytes(payload)
    slots = eligible_slots(carrier, spec)
    cap = _capacity_from_slots(slots.size, spec)
    if slots.size < HEADER_BITS * spec.header_redundancy:
        raise PayloadTooLarge(f"carrier has {slots.size} slots, the header alone needs "
                              f"{HEADER_BITS * spec.header_redundancy}")
    if len(payload) > cap:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds capacity {cap}")
    bits = np.concatenate([
        np.repeat(_bits(_header(payload)), spec.header_redundancy),
        np.repeat(_bits(payload), spec.redundancy),
    ]).astype(np.int16)
    flat = carrier.flat_coefficients().astype(np.int16)
    target = slots[:bits.size]
    values = flat[target]
    mags = (np.abs(values) & ~1) | bits
    flat[target] = np.where(values < 0, -mags, mags)
    if spec.quality_tolerance:
        quality = spec.reference_quality or estimate_quality(carrier)
        if quality is None:
            raise ValueError("quality_tolerance needs a reference_quality for non-standard tables")
        _robustify(flat, carrier, target, quality, spec.quality_tolerance)
    stego = _unflatten(carrier, flat)
    if spec.stabilize_blocks:
        stego, _ = stabilize(stego)
    return stego


def _vote(raw, copies):
    return (raw.reshape(-1, copies).sum(axis=1) * 2 > copies).astype(np.uint8)


def extract(stego: CoefficientImage, spec: EmbedSpec) -> ExtractOutcome:
    """Recover a payload and classify the result; never raises for bad data."""
    if spec.reference_quality is not None:
        stego = requantize(stego, spec.reference_quality)
    slots = eligible_slots(stego, spec)
    hr = spec.header_redundancy
    cap = _capacity_from_slots(slots.size, spec)
    if slots.size < HEADER_BITS * hr:
        return ExtractOutcome(Outcome.MISMATCH)
    flat = stego.flat_coefficients()
    raw = (np.abs(flat[slots]) & 1).astype(np.uint8)
    header = np.packbits(_vote(raw[:HEADER_BITS * hr], hr)).tobytes()
    length = int.from_bytes(header[:4], "big")
    crc = int.from_bytes(header[4:], "big")
    if length > cap:
        return ExtractOutcome(Outcome.MISMATCH)
    start = HEADER_BITS * hr
    body = raw[start:start + 8 * length * spec.redundancy]
    payload = np.packbits(_vote(body, spec.redundancy)).tobytes() if length else b""
    if zlib.crc32(payload) == crc:
        return ExtractOutcome(Outcome.INTACT, payload)
    return ExtractOutcome(Outcome.CORRUPTED, payload)


def extract_any(stego: CoefficientImage, spec: EmbedSpec, redundancies=(1, 3, 5, 7, 9)):
    """Try each redundancy in turn; returns ``(ExtractOutcome, redundancy)``.

    The first Intact reading wins. Failing that, the first CorruptedRecovered
    reading is returned, then KeyOrCarrierMismatch with ``spec.redundancy``.
    """
    if spec.reference_quality is not None:
        stego = requantize(stego, spec.reference_quality)
    plain = dataclasses.replace(spec, reference_quality=None)
    corrupted = None
    for r in redundancies:
        result = extract(stego, dataclasses.replace(plain, redundancy=r))
        if result.intact:
            return result, r
        if result.classification is Outcome.CORRUPTED and corrupted is None:
            corrupted = (result, r)
    return corrupted or (ExtractOutcome(Outcome.MISMATCH), spec.redundancy)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(255.0 ** 2 / mse))


def visual_distortion(carrier: CoefficientImage, stego: CoefficientImage) -> float:
    """PSNR (dB) between the decompressed images; ``inf`` when identical."""
    if (carrier.width, carrier.height) != (stego.width, stego.height) or \
            len(carrier.components) != len(stego.components):
        raise DimensionMismatch("carrier and stego images differ in geometry")
    return psnr(decompress(carrier).samples, decompress(stego).samples)
