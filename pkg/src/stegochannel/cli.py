"""Command-line front end: ``stegochannel <subcommand> ...``.

Exit codes
    0   success
    2   format rejected by the channel
    3   extraction found nothing (wrong key or not a stego image)
    4   extraction recovered a corrupted payload (CRC mismatch)
    5   carrier preparation did not converge
    6   payload exceeds the carrier's capacity
    7   malformed JPEG stream
    8   unsupported JPEG coding (progressive, arithmetic, 12-bit)
    9   empty input
    10  image dimensions differ
    11  image has no nonzero AC coefficients
    12  corpus too small for a fit
    13  no benchmark records
    64  usage error
    66  input file missing or unreadable
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import jsonschema
import numpy as np

from . import errors
from .bench import (DEFAULT_SIZES, PAYLOAD_KINDS, Carrier, plot_curves, read_summary, records_csv,
                    run_experiment, summarize, summary_csv)
from .carrier_prep import DEFAULT_HEADROOM, RESOLUTION_CLASSES, prepare
from .channel import ChannelProfile, load_profile, transmit
from .jpeg import PixelImage, decode, encode
from .stego import EmbedSpec, Outcome, capacity, embed, extract, extract_any
from .steganalysis import (DEFAULT_WINDOW, BenfordParams, benford_test, chi_square_attack,
                           default_benford_params, signature_scan)

EXIT_OK = 0
EXIT_USAGE = 64
EXIT_NOINPUT = 66
EXIT_CODES = {
    errors.FormatRejected: 2,
    errors.NotConverged: 5,
    errors.PayloadTooLarge: 6,
    errors.MalformedStream: 7,
    errors.UnsupportedCoding: 8,
    errors.EmptyInput: 9,
    errors.DimensionMismatch: 10,
    errors.NoNonzeroCoefficients: 11,
    errors.InsufficientCorpus: 12,
    errors.EmptyRecords: 13,
}
OUTCOME_CODES = {Outcome.INTACT: 0, Outcome.MISMATCH: 3, Outcome.CORRUPTED: 4, Outcome.REFUSED: 6}

log = logging.getLogger("stegochannel")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print(text)


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _sniff(data: bytes):
    """(format name, upload object) for raw file bytes.

    JPEG stays as bytes; anything Pillow can read becomes a PixelImage,
    which is how the channel receives non-JPEG uploads.
    """
    if data.startswith(b"\xff\xd8"):
        return "JPEG", data
    from PIL import Image

    try:
        with Image.open(io.BytesIO(data)) as im:
            fmt = im.format
            rgb = np.asarray(im.convert("L" if im.mode in ("L", "I;16", "1") else "RGB"))
    except Exception as exc:
        raise errors.MalformedStream(f"unrecognized image file: {exc}") from exc
    return fmt, PixelImage.from_rgb(rgb)


def _profile(args) -> ChannelProfile:
    try:
        return load_profile(args.profile)
    except OSError as exc:
        raise UsageError(f"cannot read profile: {exc}") from exc
    except (ValueError, TypeError, jsonschema.ValidationError) as exc:
        raise ValueError(f"invalid profile: {exc}") from exc


def _spec(args, profile=None, redundancy=None) -> EmbedSpec:
    ref = args.reference_quality
    if ref is None and profile is not None:
        ref = profile.requant_quality
    return EmbedSpec(args.passphrase, redundancy or args.redundancy, reference_quality=ref,
                     quality_tolerance=getattr(args, "tolerance", 0) or 0,
                     sequential=getattr(args, "sequential", False))


def cmd_transmit(args):
    fmt, upload = _sniff(_read_bytes(args.input))
    if args.format:
        fmt = args.format
    out = transmit(upload, fmt, _profile(args), args.seed)
    Path(args.out).write_bytes(out)
    _emit(args, {"input_format": fmt, "output": str(args.out), "bytes": len(out)},
          f"{args.input} ({fmt}) -> {args.out}, {len(out)} bytes")
    return EXIT_OK


def cmd_prepare(args):
    _, upload = _sniff(_read_bytes(args.input))
    profile = _profile(args)
    try:
        img, report = prepare(upload, profile, args.resolution_class, args.tol, args.max_iters,
                              seed=args.seed, headroom=args.headroom)
        code = EXIT_OK
    except errors.NotConverged as exc:
        img, report, code = exc.image, exc.report, EXIT_CODES[errors.NotConverged]
    if args.out:
        Path(args.out).write_bytes(encode(img))
    if args.report:
        with open(args.report, "w") as fh:
            fh.write("pass,size_ratio\n")
            for i, ratio in enumerate(report.ratios, 1):
                fh.write(f"{i},{ratio:.6f}\n")
    result = {**asdict(report), "stability": report.stability, "output": args.out}
    _emit(args, result, f"{'converged' if report.converged else 'NOT converged'} after "
          f"{report.iterations_used} pass(es): ratio {report.final_size_ratio:.4f}, "
          f"stability {report.stability:.6f}")
    return code


def cmd_embed(args):
    carrier = decode(_read_bytes(args.input))
    payload = _read_bytes(args.payload)
    spec = _spec(args, _profile(args) if args.tolerance else None)
    stego = embed(carrier, payload, spec)
    Path(args.out).write_bytes(encode(stego))
    _emit(args, {"payload_bytes": len(payload), "capacity": capacity(carrier, spec), "output": str(args.out)},
          f"embedded {len(payload)} bytes (capacity {capacity(carrier, spec)}) -> {args.out}")
    return EXIT_OK


def cmd_extract(args):
    stego = decode(_read_bytes(args.input))
    spec = _spec(args, _profile(args), redundancy=args.redundancy or 1)
    if args.redundancy:
        result, r = extract(stego, spec), args.redundancy
    else:
        result, r = extract_any(stego, spec)
    if result.payload is not None and args.out:
        Path(args.out).write_bytes(result.payload)
    n = len(result.payload) if result.payload is not None else None
    _emit(args, {"outcome": result.classification.value, "redundancy": r, "payload_bytes": n},
          f"{result.classification.value}" + (f": {n} bytes -> {args.out}" if n is not None else ""))
    return OUTCOME_CODES[result.classification]


def cmd_capacity(args):
    carrier = decode(_read_bytes(args.input))
    spec = EmbedSpec(args.passphrase, args.redundancy)
    cap = capacity(carrier, spec)
    _emit(args, {"capacity": cap, "redundancy": args.redundancy}, str(cap))
    return EXIT_OK


def cmd_analyze(args):
    data = _read_bytes(args.input)
    findings = signature_scan(data)
    img = decode(data)
    series = chi_square_attack(img, args.chi_window)
    params = BenfordParams.load(args.benford_params) if args.benford_params else default_benford_params()
    divergence = benford_test(img, params)
    result = {
        "signature_findings": [asdict(f) for f in findings],
        "chi_square": {"window_blocks": args.chi_window, "score": float(series.mean()),
                       "max": float(series.max()), "series": [round(float(p), 6) for p in series]},
        "benford": {"divergence": divergence, "params": asdict(params)},
    }
    _emit(args, result, f"findings: {len(findings)}\nchi-square score: {series.mean():.4f}\n"
          f"benford divergence: {divergence:.6f}")
    return EXIT_OK


def _load_corpus(directory, resolution_class):
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in (".jpg", ".jpeg"))
    if not paths:
        raise UsageError(f"no .jpg files in {directory}")
    corpus = []
    for p in paths:
        img = decode(p.read_bytes())
        cls = resolution_class or (960 if max(img.width, img.height) <= 960 else 2048)
        corpus.append(Carrier(p.stem, cls, img))
    return corpus


def cmd_bench(args):
    profile = _profile(args)
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else list(DEFAULT_SIZES)
    tolerance = profile.quality_jitter if args.tolerance is None else args.tolerance
    spec = EmbedSpec(args.passphrase, args.redundancy, reference_quality=profile.requant_quality,
                     quality_tolerance=tolerance)
    corpus = _load_corpus(args.corpus, args.resolution_class)
    records = run_experiment(corpus, profile, sizes, spec, args.trials, args.kind, args.seed, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records_csv(records, out / "records.csv")
    table = summarize(records)
    summary_csv(table, out / "summary.csv")
    figures = plot_curves(table, out)
    rows = [{**r.row(), "success_rate": r.success_rate} for r in table]
    _emit(args, {"records": len(records), "summary": rows, "figures": [str(f) for f in figures]},
          summary_csv(table).rstrip())
    return EXIT_OK


def cmd_plot(args):
    figures = plot_curves(read_summary(args.summary), args.out)
    _emit(args, {"figures": [str(f) for f in figures]}, "\n".join(str(f) for f in figures))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stegochannel", description="Coefficient-domain JPEG steganography "
                     "through a simulated recompressing photo channel.",
                     epilog="The default channel profile path may be set with $STEGOCHANNEL_PROFILE.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="<command>")
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
        p.set_defaults(func=func)
        return p

    def profile_arg(p):
        p.add_argument("--profile", help="channel profile JSON (default: $STEGOCHANNEL_PROFILE or built-in)")

    def key_args(p):
        p.add_argument("--pass", dest="passphrase", required=True)
        p.add_argument("--reference-quality", type=int, default=None,
                       help="quality the carrier was prepared at (default: the profile's)")

    p = add("transmit", cmd_transmit, "push an image through the simulated channel")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", help="override the detected upload format")
    p.add_argument("--seed", type=int, default=0)
    profile_arg(p)

    p = add("prepare", cmd_prepare, "drive a carrier to a channel fixed point")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--class", dest="resolution_class", type=int, choices=RESOLUTION_CLASSES, required=True)
    p.add_argument("--tol", type=float, default=0.03)
    p.add_argument("--max-iters", type=int, default=5)
    p.add_argument("--headroom", type=int, default=DEFAULT_HEADROOM)
    p.add_argument("--report", help="per-pass size ratios as CSV")
    p.add_argument("--seed", type=int, default=0)
    profile_arg(p)

    p = add("embed", cmd_embed, "hide a payload in a JPEG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--payload", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--redundancy", type=int, default=5)
    p.add_argument("--tolerance", type=int, default=0,
                   help="pre-compensate requantization this many quality steps either side")
    p.add_argument("--sequential", action="store_true", help=argparse.SUPPRESS)
    key_args(p)
    profile_arg(p)

    p = add("extract", cmd_extract, "recover a payload from a (downloaded) JPEG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--redundancy", type=int, default=None, help="default: try 1, 3, 5, 7, 9")
    key_args(p)
    profile_arg(p)

    p = add("capacity", cmd_capacity, "payload bytes a carrier can hold")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--redundancy", type=int, default=5)
    p.add_argument("--pass", dest="passphrase", default="")

    p = add("analyze", cmd_analyze, "run the signature, chi-square and Benford detectors")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--chi-window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--benford-params", help="JSON with N, q, s")

    p = add("bench", cmd_bench, "payload-size sweep through the channel")
    p.add_argument("--corpus", required=True, help="directory of prepared .jpg carriers")
    p.add_argument("--out", required=True)
    p.add_argument("--sizes", help="comma-separated byte counts")
    p.add_argument("--redundancy", type=int, default=1)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--kind", choices=PAYLOAD_KINDS, default="text")
    p.add_argument("--class", dest="resolution_class", type=int, choices=RESOLUTION_CLASSES,
                   help="default: from each carrier's long side")
    p.add_argument("--tolerance", type=int, default=None, help="default: the profile's quality_jitter")
    p.add_argument("--pass", dest="passphrase", default="bench")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    profile_arg(p)

    p = add("plot", cmd_plot, "render success-rate curves from a summary.csv")
    p.add_argument("--summary", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"stegochannel: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except errors.StegoChannelError as exc:
        print(f"stegochannel: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CODES[type(exc)]
    except ValueError as exc:
        print(f"stegochannel: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
