"""Fit the default generalized-Benford parameters on the local clean corpus.

Carriers are prepared for the default channel (quality 75), so the fitted
law describes what clean images look like after the channel.
"""

import argparse
import json
import logging
from pathlib import Path

from stegochannel.bench import fit_benford_params
from stegochannel.carrier_prep import prepare
from stegochannel.channel import ChannelProfile
from stegochannel.corpus import build_corpus, camera_jpeg, color_photos

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "stegochannel" / "data" / "benford_params.json"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mosaics", type=int, default=30)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    profile = ChannelProfile()
    sources = color_photos() + build_corpus(args.mosaics, 960, seed=args.seed)
    images = [prepare(camera_jpeg(rgb), profile, 960)[0] for _, rgb in sources]
    fit = fit_benford_params(images)
    logging.info("fitted %s on %d images, rms residual %.5f", fit.params, len(images), fit.residual)
    record = {
        "N": round(fit.params.N, 6), "q": round(fit.params.q, 6), "s": round(fit.params.s, 6),
        "residual": round(fit.residual, 8), "images": len(images),
        "quality": profile.requant_quality, "seed": args.seed,
    }
    args.out.write_text(json.dumps(record, indent=2) + "\n")


if __name__ == "__main__":
    main()
