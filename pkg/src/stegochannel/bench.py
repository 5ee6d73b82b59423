"""Capacity benchmark: sweep payload sizes through the channel and tally outcomes."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import zlib
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .channel import ChannelProfile, transmit
from .errors import EmptyRecords, InsufficientCorpus, PayloadTooLarge
from .jpeg import decode, encode
from .jpeg.types import CoefficientImage
from .steganalysis import DIGITS, BenfordParams, first_digit_counts, generalized_benford
from .stego import EmbedSpec, Outcome, embed, extract

log = logging.getLogger(__name__)

DEFAULT_SIZES = (1, 65, 400, 700, 1024, 3072, 5120, 12288)
PAYLOAD_KINDS = ("text", "image")
RECORD_FIELDS = ("carrier_id", "resolution_class", "payload_kind", "payload_bytes",
                 "trial", "redundancy", "outcome", "channel_seed")
SUMMARY_FIELDS = ("resolution_class", "payload_kind", "payload_bytes", "trials", "intact",
                  "corrupted", "mismatch", "refused", "success_rate")
_TEXT_ALPHABET = np.frombuffer(
    b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:'!?-\n", dtype=np.uint8)


@dataclass(frozen=True)
class Carrier:
    carrier_id: str
    resolution_class: int
    image: CoefficientImage


@dataclass(frozen=True)
class SuccessRecord:
    carrier_id: str
    resolution_class: int
    payload_kind: str
    payload_bytes: int
    outcome: Outcome
    channel_seed: int
    trial: int = 0
    redundancy: int = 1

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.INTACT

    def row(self) -> dict:
        row = dataclasses.asdict(self)
        row["outcome"] = self.outcome.value
        return row


def derive_seed(*keys) -> int:
    """63-bit seed from a tuple of non-negative ints."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0] >> np.uint64(1))


def _id_key(carrier_id: str) -> int:
    return zlib.crc32(carrier_id.encode("utf-8"))


def sample_image_payload() -> bytes:
    """The bundled sample JPEG used as the image payload source."""
    return resources.files("stegochannel").joinpath("data/sample_payload.jpg").read_bytes()


def make_payload(kind: str, size: int, seed: int) -> bytes:
    """Deterministic payload of exactly ``size`` bytes; shorter sizes are prefixes of longer ones."""
    if kind == "text":
        rng = np.random.default_rng(seed)
        return _TEXT_ALPHABET[rng.integers(len(_TEXT_ALPHABET), size=size)].tobytes()
    if kind == "image":
        blob = sample_image_payload()
        reps = -(-size // len(blob)) if size else 0
        return (blob * reps)[:size]
    raise ValueError(f"unknown payload kind {kind!r}")


def _receiver_spec(spec: EmbedSpec, profile: ChannelProfile) -> EmbedSpec:
    # the receiver knows the quality the carriers were prepared at
    if spec.reference_quality is None:
        return dataclasses.replace(spec, reference_quality=profile.requant_quality)
    return spec


def run_trial(carrier: Carrier, profile: ChannelProfile, spec: EmbedSpec, kind: str,
              size: int, trial: int, seed: int) -> SuccessRecord:
    key = _id_key(carrier.carrier_id)
    channel_seed = derive_seed(seed, key, trial)
    # one message per (carrier, trial); every size sends a prefix of it
    payload = make_payload(kind, size, derive_seed(seed, key, trial, PAYLOAD_KINDS.index(kind)))
    record = dict(carrier_id=carrier.carrier_id, resolution_class=carrier.resolution_class,
                  payload_kind=kind, payload_bytes=size, channel_seed=channel_seed,
                  trial=trial, redundancy=spec.redundancy)
    try:
        stego = embed(carrier.image, payload, spec)
    except PayloadTooLarge:
        return SuccessRecord(outcome=Outcome.REFUSED, **record)
    received = decode(transmit(encode(stego), "JPEG", profile, channel_seed))
    result = extract(received, _receiver_spec(spec, profile))
    outcome = result.classification
    if outcome is Outcome.INTACT and result.payload != payload:
        outcome = Outcome.CORRUPTED
    return SuccessRecord(outcome=outcome, **record)


def smoke_test(carrier: Carrier, profile: ChannelProfile, spec: EmbedSpec, seed: int = 0) -> bool:
    """A 1-byte payload must survive the nominal (jitter-free) channel."""
    nominal = profile.replace(quality_jitter=0)
    return run_trial(carrier, nominal, spec, "text", 1, 0, seed).success


def _run_cell(args):
    return run_trial(*args)


def _sort_key(r: SuccessRecord):
    return (r.resolution_class, r.payload_kind, r.payload_bytes, r.carrier_id, r.trial)


def run_experiment(corpus, profile: ChannelProfile, payload_sizes, spec: EmbedSpec,
                   trials_per_cell: int, payload_kind: str = "text", seed: int = 0,
                   jobs: int = 1) -> list:
    """Every (carrier, size, trial) that passed the smoke test, one record each.

    Carriers failing the 1-byte smoke test are dropped (and logged) before
    any record is produced. The channel seed depends on (seed, carrier,
    trial) only, so all sizes of one trial see the same channel draw.
    """
    if trials_per_cell < 1:
        raise ValueError("trials_per_cell must be >= 1")
    carriers = []
    for c in corpus:
        if smoke_test(c, profile, spec, seed):
            carriers.append(c)
        else:
            log.warning("carrier %s failed the 1-byte smoke test; excluded", c.carrier_id)
    tasks = [(c, profile, spec, payload_kind, int(size), t, seed)
             for c in carriers for size in payload_sizes for t in range(trials_per_cell)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_run_cell(t) for t in tasks]
    return sorted(records, key=_sort_key)


@dataclass(frozen=True)
class SummaryRow:
    resolution_class: int
    payload_kind: str
    payload_bytes: int
    trials: int
    intact: int
    corrupted: int
    mismatch: int
    refused: int

    @property
    def success_rate(self) -> float:
        return self.intact / self.trials

    def row(self) -> dict:
        return {**dataclasses.asdict(self), "success_rate": f"{self.success_rate:.6f}"}


def summarize(records) -> list:
    """Per (class, kind, size) cell tallies; success counts Intact only."""
    records = list(records)
    if not records:
        raise EmptyRecords("no records to summarize")
    cells = {}
    for r in records:
        cells.setdefault((r.resolution_class, r.payload_kind, r.payload_bytes), Counter())[r.outcome] += 1
    return [SummaryRow(cls, kind, size, sum(c.values()), c[Outcome.INTACT], c[Outcome.CORRUPTED],
                       c[Outcome.MISMATCH], c[Outcome.REFUSED])
            for (cls, kind, size), c in sorted(cells.items())]


def _write_csv(path, fields, rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def records_csv(records, path=None) -> str:
    return _write_csv(path, RECORD_FIELDS, [r.row() for r in records])


def summary_csv(table, path=None) -> str:
    return _write_csv(path, SUMMARY_FIELDS, [row.row() for row in table])


def read_records(path) -> list:
    with open(path, newline="") as fh:
        return [SuccessRecord(carrier_id=row["carrier_id"], resolution_class=int(row["resolution_class"]),
                              payload_kind=row["payload_kind"], payload_bytes=int(row["payload_bytes"]),
                              outcome=Outcome(row["outcome"]), channel_seed=int(row["channel_seed"]),
                              trial=int(row["trial"]), redundancy=int(row["redundancy"]))
                for row in csv.DictReader(fh)]


def read_summary(path) -> list:
    with open(path, newline="") as fh:
        return [SummaryRow(int(r["resolution_class"]), r["payload_kind"], int(r["payload_bytes"]),
                           int(r["trials"]), int(r["intact"]), int(r["corrupted"]),
                           int(r["mismatch"]), int(r["refused"]))
                for r in csv.DictReader(fh)]


def curve(table, resolution_class, payload_kind, sizes=None):
    """(sizes, rates) for one figure; sizes missing from the table give NaN."""
    cells = {r.payload_bytes: r.success_rate for r in table
             if r.resolution_class == resolution_class and r.payload_kind == payload_kind}
    sizes = sorted(sizes if sizes is not None else cells)
    return np.array(sizes), np.array([cells.get(s, np.nan) for s in sizes])


def plot_curves(table, out_dir) -> list:
    """One PNG per (class, kind): success rate against payload size.

    All figures share the x positions of every size in the table, so a
    size absent from one cell breaks that line instead of being bridged.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_sizes = sorted({r.payload_bytes for r in table})
    paths = []
    for cls, kind in sorted({(r.resolution_class, r.payload_kind) for r in table}):
        sizes, rates = curve(table, cls, kind, all_sizes)
        fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
        ax.plot(np.arange(len(sizes)), rates, marker="o")
        ax.set_xticks(np.arange(len(sizes)), [str(s) for s in sizes], rotation=45)
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("payload size (bytes)")
        ax.set_ylabel("success rate (intact)")
        ax.set_title(f"{kind} payloads, {cls}-px class")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"fig_{cls}_{kind}.png"
        fig.savefig(path, format="png", metadata={"Software": None})
        plt.close(fig)
        paths.append(path)
    return paths


# RMS residual above which the law does not describe the corpus (clean photos: ~0.001)
POOR_FIT_RESIDUAL = 0.01


@dataclass(frozen=True)
class BenfordFit:
    params: BenfordParams
    residual: float
    counts: tuple

    @property
    def poor(self) -> bool:
        return self.residual > POOR_FIT_RESIDUAL


def _fit_digit_pmf(pmf):
    def resid(x):
        return generalized_benford(DIGITS, *x) - pmf
    fit = least_squares(resid, x0=(1.4, 1.2, -0.05), method="trf",
                        bounds=([1e-3, 1e-2, -0.99], [10.0, 5.0, 10.0]), x_scale="jac",
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=20000)
    return fit.x, float(np.sqrt(np.mean(fit.fun ** 2)))


def fit_benford_params(clean_corpus, min_images: int = 10) -> BenfordFit:
    """Least-squares generalized-Benford fit to the pooled first-digit frequencies.

    ``residual`` is the RMS difference between the fitted law and the
    observed frequencies.
    """
    images = list(clean_corpus)
    if len(images) < min_images:
        raise InsufficientCorpus(f"need at least {min_images} clean images, got {len(images)}")
    counts = sum(first_digit_counts(img) for img in images)
    total = counts.sum()
    if total == 0:
        raise InsufficientCorpus("corpus has no nonzero AC coefficients")
    (n, q, s), residual = _fit_digit_pmf(counts / total)
    if residual > POOR_FIT_RESIDUAL:
        log.warning("generalized Benford fit is poor (rms residual %.4f)", residual)
    return BenfordFit(BenfordParams(float(n), float(q), float(s)), residual, tuple(int(c) for c in counts))
