"""Command-line front end.

Exit status: 0 success, 1 pipeline failure (or validation violations),
2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import pipeline
from .degrade import CODEC_ENV
from .errors import HSADError


def _snr_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="hsad", description="Hybrid spoofed-audio dataset and detector toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="build a manifest from WAV files and JSON sidecars")
    s.add_argument("dir")
    s.add_argument("--out", required=True, help="manifest path to write")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("compose", help="cross-fade hybrid utterances")
    s.add_argument("--manifest", required=True)
    s.add_argument("--pattern", choices=sorted(pipeline.PATTERNS), required=True)
    s.add_argument("--fade-ms", type=float, default=10.0)
    s.add_argument("--synthetic", choices=["generated", "cloned", "mixed"], default="generated",
                   help="source of the synthetic segments (mixed: cloned/generated interleave)")
    s.add_argument("--count", type=int, default=None, help="max hybrids to build")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("degrade", help="noise, low-pass and codec degradation")
    s.add_argument("--manifest", required=True)
    s.add_argument("--snr", type=_snr_list, default=[10.0, 15.0, 20.0, 30.0],
                   help="comma-separated SNRs in dB, assigned round-robin (empty string: no noise)")
    s.add_argument("--noise", default=None, help="noise WAV (default: seeded white noise)")
    s.add_argument("--lowpass", type=float, default=None, help="cutoff in Hz, e.g. 4000")
    s.add_argument("--codec", choices=["none", "sim16", "sim24", "ext"], default="none")
    s.add_argument("--codec-cmd", default=None, help=f"external codec template (default ${CODEC_ENV})")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("featurize", help="write normalized log-Mel spectrogram cache files")
    s.add_argument("--manifest", required=True)
    s.add_argument("--cache", required=True)
    s.add_argument("--seconds", type=float, default=6.0)
    s.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("train", help="train the spectrogram transformer")
    s.add_argument("--manifest", required=True)
    s.add_argument("--config", default=None, help="JSON config file")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--cache", default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--lr0", type=float, default=None)
    s.add_argument("--batch-size", type=int, default=None)
    s.add_argument("--jobs", type=int, default=None)

    s = sub.add_parser("evaluate", help="score a checkpoint and write reports")
    s.add_argument("--manifest", required=True)
    s.add_argument("--ckpt", required=True)
    s.add_argument("--report", required=True, help="output path prefix")
    s.add_argument("--split", choices=["test", "all"], default="test")
    s.add_argument("--cache", default=None)
    s.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("validate", help="check a manifest")
    s.add_argument("--manifest", required=True)

    s = sub.add_parser("stats", help="reliability statistics per group")
    s.add_argument("--scores", required=True)
    s.add_argument("--groups", action="store_true", help="one row per group")
    s.add_argument("--bin-width", type=float, default=0.01)
    return p


def _run(args):
    if args.command == "ingest":
        records = pipeline.run_ingest(args.dir, args.out, args.seed)
        print(f"{len(records)} records -> {args.out}")
    elif args.command == "compose":
        pipeline.run_compose(args.manifest, args.pattern, args.out, args.fade_ms, args.seed,
                             args.synthetic, args.count)
    elif args.command == "degrade":
        pipeline.run_degrade(args.manifest, args.out, args.snr, args.lowpass, args.codec, args.seed,
                             args.noise, args.codec_cmd or os.environ.get(CODEC_ENV), args.jobs)
    elif args.command == "featurize":
        pipeline.run_featurize(args.manifest, args.cache, args.seconds, args.jobs)
    elif args.command == "train":
        cfg = pipeline.load_config(args.config, seed=args.seed, epochs=args.epochs, lr0=args.lr0,
                                   batch_size=args.batch_size, jobs=args.jobs)
        res = pipeline.run_train(args.manifest, args.out, cfg, args.cache)
        print(f"best epoch {res.best_epoch} of {len(res.history)} -> {args.out}")
    elif args.command == "evaluate":
        report = pipeline.run_evaluate(args.manifest, args.ckpt, args.report, args.split, args.cache, args.jobs)
        print(f"accuracy {report.accuracy_pct:.2f}% over {report.total} utterances")
    elif args.command == "validate":
        result = pipeline.run_validate(args.manifest)
        print(result.summary.render())
        for w in result.warnings:
            print(f"warning: {w}")
        for v in result.violations:
            print(f"violation: {v}")
        return 0 if result.ok else 1
    elif args.command == "stats":
        _, table = pipeline.run_stats(args.scores, args.groups, args.bin_width)
        print(table)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _run(args)
    except (HSADError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "command": args.command, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
