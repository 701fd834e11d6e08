"""Command-line entry point: simulate, train, detect, roc.

Examples::

    csitamper simulate --scenario A --frames 4000 --seed 7 -o off.csid
    csitamper train off.csid -o room.tprf
    csitamper simulate --scenario C --orientation r5 --frames 1000 --seed 9 -o win.csid
    csitamper detect win.csid --profile room.tprf          # exit 0 clean, 2 tampering
    csitamper detect win.csid --method 1 --offline off.csid --threshold 1.5
    csitamper roc --train off.csid --tamper-free clean.csid --tampered rot.csid -o roc.csv

``detect`` exits 0 for tamper-free, 2 for tampering and 1 on any error; usage
errors also exit 1 so that 2 always means an alarm.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel_sim import Scenario, SimConfig, load_sim_config, scenario_dataset
from .csi import CsiDataset, Label, load_csv, load_dataset, save_csv, save_dataset
from .dcae import PRESETS, DcaeConfig, TrainConfig
from .density import DEFAULT_BANDWIDTH
from .detectors import (
    DEFAULT_ETA_THRESHOLD,
    DEFAULT_WINDOW,
    Decision,
    load_profile,
    method1_decide,
    method2_decide,
    method3_offline,
    method3_online,
    save_profile,
)
from .evaluation import CompareConfig, compare_methods, plot_roc_svg, write_results_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TAMPERING = 2
THREADS_ENV = "CSI_TAMPER_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _bandwidth(text):
    if text.lower() in ("auto", "scott"):
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def read_csi(path) -> CsiDataset:
    """Load a dataset, choosing the reader by file suffix (``.csv`` or binary)."""
    return load_csv(path) if Path(path).suffix.lower() == ".csv" else load_dataset(path)


def write_csi(dataset: CsiDataset, path) -> None:
    if Path(path).suffix.lower() == ".csv":
        save_csv(dataset, path)
    else:
        save_dataset(dataset, path)


def _read_many(paths, label=None) -> CsiDataset:
    datasets = [read_csi(p) for p in paths]
    return CsiDataset.concatenate(datasets, label=label)


def _check_distinct(*paths):
    resolved = [Path(p).resolve() for p in paths if p is not None]
    if len(set(resolved)) != len(resolved):
        raise ValueError("input and output paths must be distinct")


def _add_train_flags(p):
    p.add_argument("--epochs", type=_positive_int, default=20)
    p.add_argument("--batch-size", type=_positive_int, default=100)
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    p.add_argument("--bandwidth", type=_bandwidth, default=DEFAULT_BANDWIDTH,
                   help="KDE bandwidth: 'auto' (Scott's rule) or a positive number")
    p.add_argument("--window", type=_positive_int, default=DEFAULT_WINDOW,
                   help="frames per online window")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csitamper", description="CSI-based physical tamper detection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic CSI dataset")
    p.add_argument("--scenario", default="A", help="occupancy preset A..G (default: A)")
    p.add_argument("--orientation", default="default", help="'default' or r1..r7")
    p.add_argument("--frames", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key=value channel config file")
    p.add_argument("-o", "--output", required=True, help=".csid or .csv output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the autoencoder and write a detector profile")
    p.add_argument("inputs", nargs="+", help="tamper-free dataset file(s)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="dcae1")
    _add_train_flags(p)
    p.add_argument("--eta-threshold", type=float, default=DEFAULT_ETA_THRESHOLD)
    p.add_argument("-o", "--output", required=True, help="profile output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="decide whether a window of frames shows tampering")
    p.add_argument("window_file", help="dataset holding the online window")
    p.add_argument("--method", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--profile", help="profile from 'train' (methods 2 and 3)")
    p.add_argument("--offline", help="tamper-free reference frames (methods 1 and 2)")
    p.add_argument("--threshold", type=float, help="distance threshold (methods 1 and 2)")
    p.add_argument("--window", type=_positive_int,
                   help="use only the last N frames (methods 1 and 2; method 3 uses the profile's window)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("roc", help="compare the three methods on labelled test data")
    p.add_argument("--train", nargs="+", required=True, help="tamper-free training file(s)")
    p.add_argument("--tamper-free", nargs="+", required=True, help="tamper-free test file(s)")
    p.add_argument("--tampered", nargs="+", required=True, help="tampered test file(s)")
    p.add_argument("--preset", nargs="+", choices=sorted(PRESETS), default=["dcae1"],
                   help="one method-3 row per preset; method 2 uses the first")
    _add_train_flags(p)
    p.add_argument("-o", "--output", required=True, help="results CSV path")
    p.add_argument("--svg", help="optional ROC plot path")
    p.set_defaults(func=cmd_roc)
    return parser


# -- commands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    base = load_sim_config(args.config) if args.config else SimConfig()
    ds = scenario_dataset(Scenario.parse(args.scenario), args.orientation, args.frames, args.seed, base)
    write_csi(ds, args.output)
    print(f"wrote {len(ds)} frames (sc={ds.sc}, label={ds.label.name}, tag={ds.scenario_tag}) to {args.output}")
    return EXIT_OK


def cmd_train(args) -> int:
    _check_distinct(*args.inputs, args.output)
    datasets = [read_csi(p) for p in args.inputs]
    for path, ds in zip(args.inputs, datasets):
        if ds.label.is_tampered:
            print(f"error: {path} is labelled {ds.label.name}; the detector is trained on "
                  "tamper-free frames only", file=sys.stderr)
            return EXIT_ERROR
    data = CsiDataset.concatenate(datasets)
    dcae_cfg = DcaeConfig.preset(args.preset, data.sc)
    train_cfg = TrainConfig(args.epochs, args.batch_size, args.lr, args.seed)
    profile = method3_offline(data, dcae_cfg, train_cfg, args.bandwidth, args.window, args.eta_threshold)
    save_profile(profile, args.output)
    scores = profile.offline_pdf.samples
    print(f"trained {args.preset} on {len(data)} frames, final MSE {profile.model.loss_history[-1]:.6g}")
    print(f"offline scores min/median/max {scores.min():.6g} {np.median(scores):.6g} {scores.max():.6g}")
    print(f"bandwidth {profile.offline_pdf.bandwidth:.6g}"
          f"{' (auto)' if profile.offline_pdf.auto_bandwidth else ''}")
    print(f"wrote profile to {args.output}")
    return EXIT_OK


def cmd_detect(args) -> int:
    window = read_csi(args.window_file)
    if args.method == 3:
        if not args.profile:
            raise ValueError("method 3 needs --profile")
        verdict = method3_online(load_profile(args.profile), window)
    else:
        if not args.offline or args.threshold is None:
            raise ValueError(f"method {args.method} needs --offline and --threshold")
        offline = read_csi(args.offline)
        frames = window.tail(args.window) if args.window else window
        if args.window and len(window) < args.window:
            raise ValueError(f"window holds {len(window)} frames, asked for {args.window}")
        if args.method == 1:
            verdict = method1_decide(offline, frames, args.threshold)
        else:
            if not args.profile:
                raise ValueError("method 2 needs --profile for the trained autoencoder")
            verdict = method2_decide(load_profile(args.profile).model, offline, frames, args.threshold)
    print(f"method: {verdict.method}")
    print(f"statistic: {verdict.statistic:.6g}")
    print(f"threshold: {verdict.threshold_used:.6g}")
    print(f"decision: {verdict.decision.value}")
    return EXIT_TAMPERING if verdict.decision is Decision.TAMPERING else EXIT_OK


def cmd_roc(args) -> int:
    _check_distinct(*args.train, *args.tamper_free, *args.tampered, args.output, args.svg)
    train_parts = [read_csi(p) for p in args.train]
    if any(d.label.is_tampered for d in train_parts):
        raise ValueError("training files must be tamper-free")
    train_set = CsiDataset.concatenate(train_parts)
    clean = _read_many(args.tamper_free, Label.TAMPER_FREE)
    rotated = _read_many(args.tampered, Label.UNKNOWN)
    config = CompareConfig(
        presets=tuple(args.preset),
        train=TrainConfig(args.epochs, args.batch_size, args.lr, args.seed),
        bandwidth=args.bandwidth,
        window=args.window,
        seed=args.seed,
    )
    results = compare_methods(train_set, clean, rotated, config)
    write_results_csv(results, args.output)
    if args.svg:
        plot_roc_svg(results, args.svg)
    for r in results:
        print(f"{r.method:16s} AUC {r.auc:.4f}  TPR@FPR=0 {r.tpr_at_fpr0:.4f}")
    print(f"wrote {args.output}" + (f" and {args.svg}" if args.svg else ""))
    return EXIT_OK


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        limit = _thread_limit()
        if limit is None:
            return args.func(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=limit):
            return args.func(args)
    except (ValueError, RuntimeError, OSError, ImportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
