"""Signature and statistical detectors for coefficient-domain steganography."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np
from scipy import stats

from .errors import MalformedStream, NoNonzeroCoefficients
from .jpeg.types import CoefficientImage

DIGITS = np.arange(1, 10)
DEFAULT_WINDOW = 128


@dataclass(frozen=True)
class Finding:
    kind: str
    offset: int
    length: int
    detail: str = ""


def _walk_to_eoi(data: bytes):
    """Offset just past the EOI that terminates the JPEG structure, or None."""
    n = len(data)
    pos = 2
    while pos + 1 < n:
        if data[pos] != 0xFF:
            return None
        while pos < n and data[pos] == 0xFF:
            pos += 1
        if pos >= n:
            return None
        marker = data[pos]
        pos += 1
        if marker == 0xD9:
            return pos
        if 0xD0 <= marker <= 0xD7 or marker == 0x01:
            continue
        if pos + 2 > n:
            return None
        pos += data[pos] << 8 | data[pos + 1]
        if marker == 0xDA:
            # entropy-coded data runs to the next non-stuffing, non-RST marker
            while pos + 1 < n:
                if data[pos] == 0xFF and data[pos + 1] != 0 and not 0xD0 <= data[pos + 1] <= 0xD7:
                    break
                pos += 1
    return None


def signature_scan(data: bytes, signatures=()) -> list:
    """Report bytes after EOI and occurrences of known tool markers.

    ``signatures`` is an iterable of ``(name, bytes)`` pairs.
    """
    data = bytes(data)
    if not data.startswith(b"\xff\xd8"):
        raise MalformedStream("missing SOI marker")
    findings = []
    end = _walk_to_eoi(data)
    if end is None:
        findings.append(Finding("unterminated", len(data), 0, "no EOI marker reached"))
    elif end < len(data):
        findings.append(Finding("trailing_data", end, len(data) - end,
                                f"{len(data) - end} bytes after EOI"))
    for name, marker in signatures:
        marker = bytes(marker)
        start = data.find(marker)
        while start >= 0:
            findings.append(Finding("tool_signature", start, len(marker), name))
            start = data.find(marker, start + 1)
    return findings


def _ac_stream(img: CoefficientImage):
    """AC coefficients as (n_blocks, 63): component order, block raster."""
    return np.concatenate([c.blocks.reshape(-1, 64)[:, 1:] for c in img.components])


def pairs_of_values_pvalue(values, min_expected=5.0) -> float:
    """Westfeld-Pfitzmann chi-square p-value on LSB value pairs.

    Pairs are (2k, 2k+1) in magnitude, kept separate per sign, for |v| >= 2.
    p near 1 means the pair counts have been equalized.
    """
    v = np.asarray(values).reshape(-1)
    v = v[np.abs(v) >= 2]
    if v.size == 0:
        return 0.0
    mags = np.abs(v).astype(np.int64)
    key = (mags // 2) * 2 + (v < 0)
    n_keys = int(key.max()) + 1
    evens = np.bincount(key[mags % 2 == 0], minlength=n_keys)
    totals = np.bincount(key, minlength=n_keys)
    expected = totals / 2.0
    keep = expected >= min_expected
    if not keep.any():
        return 0.0
    chi = float(np.sum((evens[keep] - expected[keep]) ** 2 / expected[keep]))
    dof = max(int(keep.sum()) - 1, 1)
    return float(stats.chi2.sf(chi, dof))


def chi_square_attack(img: CoefficientImage, window_blocks: int = DEFAULT_WINDOW,
                      cumulative: bool = True) -> np.ndarray:
    """Pairs-of-values p-values along the AC coefficient stream.

    The stream is cut every ``window_blocks`` blocks. With ``cumulative`` (the
    classic attack) entry ``i`` tests everything up to the end of window
    ``i``, so a sequentially embedded prefix shows up as a run of p close to 1
    that decays once the unmodified remainder dominates. Otherwise each
    window is tested on its own.
    """
    if window_blocks < 1:
        raise ValueError("window_blocks must be >= 1")
    ac = _ac_stream(img)
    ends = range(window_blocks, ac.shape[0] + window_blocks, window_blocks)
    if cumulative:
        return np.array([pairs_of_values_pvalue(ac[:end]) for end in ends])
    return np.array([pairs_of_values_pvalue(ac[end - window_blocks:end]) for end in ends])


def chi_square_score(img: CoefficientImage, window_blocks: int = DEFAULT_WINDOW,
                     cumulative: bool = True) -> float:
    """Image-level chi-square score: mean of the p-value series."""
    return float(np.mean(chi_square_attack(img, window_blocks, cumulative)))


@dataclass(frozen=True)
class BenfordParams:
    """Generalized Benford law p(d) = N * log10(1 + 1 / (s + d**q))."""

    N: float
    q: float
    s: float

    def pmf(self) -> np.ndarray:
        p = generalized_benford(DIGITS, self.N, self.q, self.s)
        return p / p.sum()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def load(cls, path) -> BenfordParams:
        with open(path) as fh:
            data = json.load(fh)
        return cls(float(data["N"]), float(data["q"]), float(data["s"]))


def generalized_benford(d, N, q, s):
    d = np.asarray(d, dtype=np.float64)
    return N * np.log10(1.0 + 1.0 / (s + d ** q))


def default_benford_params() -> BenfordParams:
    text = resources.files("stegochannel").joinpath("data/benford_params.json").read_text()
    data = json.loads(text)
    return BenfordParams(data["N"], data["q"], data["s"])


def first_digit_counts(img: CoefficientImage) -> np.ndarray:
    """Counts of leading digits 1..9 over |nonzero AC coefficients|."""
    mags = np.abs(_ac_stream(img)).reshape(-1).astype(np.int64)
    mags = mags[mags > 0]
    return first_digits_histogram(mags)


def first_digits_histogram(mags) -> np.ndarray:
    mags = np.asarray(mags, dtype=np.int64)
    first = mags.copy()
    while True:
        big = first >= 10
        if not big.any():
            break
        first[big] //= 10
    return np.bincount(first, minlength=10)[1:10]


def benford_divergence(counts, params: BenfordParams) -> float:
    """Chi-square divergence between observed digit frequencies and the law."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total == 0:
        raise NoNonzeroCoefficients("no nonzero AC coefficients")
    observed = counts / total
    expected = params.pmf()
    return float(np.sum((observed - expected) ** 2 / expected))


def benford_test(img: CoefficientImage, params: BenfordParams | None = None) -> float:
    return benford_divergence(first_digit_counts(img), params or default_benford_params())
