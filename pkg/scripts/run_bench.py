"""Success-rate sweep over payload size, both resolution classes and payload kinds.

Prepares a mosaic corpus per class, then runs the benchmark through a
jittered channel at each requested redundancy. Writes one ``records.csv``,
``summary.csv`` and set of ``fig_*.png`` per redundancy under ``--out``.

The defaults take roughly ten minutes on one core; ``--quick`` trims the
2048 class to a couple of carriers.
"""

import argparse
import logging
from pathlib import Path

from stegochannel.bench import (DEFAULT_SIZES, PAYLOAD_KINDS, Carrier, plot_curves, records_csv,
                                run_experiment, summarize, summary_csv)
from stegochannel.carrier_prep import prepare
from stegochannel.channel import ChannelProfile
from stegochannel.corpus import build_corpus, camera_jpeg
from stegochannel.errors import NotConverged
from stegochannel.stego import EmbedSpec


def carriers(resolution_class, n, seed):
    out = []
    for name, rgb in build_corpus(n, resolution_class, seed=seed):
        try:
            img, _ = prepare(camera_jpeg(rgb), ChannelProfile(), resolution_class, max_iters=3)
        except NotConverged as exc:
            img = exc.image
        out.append(Carrier(name, resolution_class, img))
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("bench_out"))
    parser.add_argument("--carriers", type=int, default=6)
    parser.add_argument("--trials", type=int, default=4)
    parser.add_argument("--jitter", type=int, default=2)
    parser.add_argument("--redundancy", default="1,5", help="comma-separated")
    parser.add_argument("--quick", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    profile = ChannelProfile(quality_jitter=args.jitter)
    corpus = carriers(960, args.carriers, args.seed) + carriers(2048, 2 if args.quick else args.carriers, args.seed)
    for r in (int(x) for x in args.redundancy.split(",")):
        spec = EmbedSpec("bench", r, reference_quality=profile.requant_quality, quality_tolerance=args.jitter)
        records = []
        for kind in PAYLOAD_KINDS:
            records += run_experiment(corpus, profile, DEFAULT_SIZES, spec, args.trials, kind, args.seed, args.jobs)
        out = args.out / f"redundancy{r}"
        out.mkdir(parents=True, exist_ok=True)
        records_csv(records, out / "records.csv")
        table = summarize(records)
        summary_csv(table, out / "summary.csv")
        plot_curves(table, out)
        logging.info("redundancy %d\n%s", r, summary_csv(table))


if __name__ == "__main__":
    main()
