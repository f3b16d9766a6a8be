"""Command-line entry point: train / eval / synth.

Every command is a pure function of its input files, flags and seed; reruns
produce byte-identical artifacts (per kernel backend). Artifacts are written
atomically and only after the whole computation succeeded, so failures leave
no partial outputs.

Exit codes: 0 success, 2 argument errors, 3 data/format errors, 4 training
divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .backend import backend_name
from .data import (HsiMatrix, SplitSpec, atomic_write_bytes, flatten_labeled,
                   matrix_to_cube, read_hsic, synth_scene, write_hsic)
from .errors import (DataError, DomainError, DropcaeError, FormatError,
                     ParameterError, TrainingError)
from .eval import evaluate_subset
from .model import SCHEDULE_PRESETS, BandSubset, TrainConfig, train


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dropcae",
        description="Hyperspectral band selection with a dropout-gated "
                    "concrete autoencoder",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the selector and write the band subset")
    p_train.add_argument("--input", required=True, help="HSIC scene file")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--k", type=int, required=True, help="bands to select")
    p_train.add_argument("--schedule", choices=sorted(SCHEDULE_PRESETS),
                         help="named annealing preset; otherwise give all of "
                              "--tau0/--tauC/--epochs/--batch")
    p_train.add_argument("--tau0", type=float)
    p_train.add_argument("--tauC", type=float)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch", type=int)
    p_train.add_argument("--lambda", dest="lam", type=float, default=0.005)
    p_train.add_argument("--lr", type=float, default=0.001)
    p_train.add_argument("--hidden", type=int, default=128)
    p_train.add_argument("--full-bce", action="store_true")
    p_train.add_argument("--seed", type=int, default=0)

    p_eval = sub.add_parser("eval", help="classify on a band subset and report OA/AA/Kappa")
    p_eval.add_argument("--input", required=True, help="HSIC scene file")
    p_eval.add_argument("--out", required=True, help="output directory")
    group = p_eval.add_mutually_exclusive_group(required=True)
    group.add_argument("--subset", help="subset.json from a training run")
    group.add_argument("--all-bands", action="store_true",
                       help="evaluate the full band set")
    p_eval.add_argument("--runs", type=int, default=10)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--train-fraction", type=float, default=0.1)
    p_eval.add_argument("--stratified", action=argparse.BooleanOptionalAction,
                        default=True)
    p_eval.add_argument("--bins", type=int, default=256)
    p_eval.add_argument("--svm-epochs", type=int, default=60)
    p_eval.add_argument("--svm-lr", type=float, default=0.05)
    p_eval.add_argument("--svm-reg", type=float, default=1e-4)

    p_synth = sub.add_parser("synth", help="write a synthetic scene with planted bands")
    p_synth.add_argument("--d", type=int, required=True)
    p_synth.add_argument("--k", type=int, required=True)
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--sigma", type=float, default=0.05)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output HSIC path")
    return parser


def _train_config(args, d: int) -> tuple[TrainConfig, str]:
    overrides = {}
    if args.tau0 is not None:
        overrides["tau0"] = args.tau0
    if args.tauC is not None:
        overrides["tauC"] = args.tauC
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.batch is not None:
        overrides["batch_size"] = args.batch
    common = dict(k=args.k, seed=args.seed, lam=args.lam, base_lr=args.lr,
                  hidden=args.hidden, full_bce=args.full_bce)
    if args.schedule:
        config = TrainConfig.for_schedule(args.schedule, **common, **overrides)
        name = args.schedule
    else:
        missing = [f for f in ("tau0", "tauC", "epochs", "batch")
                   if getattr(args, f if f != "batch" else "batch") is None]
        if missing:
            raise ParameterError(
                "custom schedules need --tau0, --tauC, --epochs and --batch "
                f"(missing: {', '.join('--' + f for f in missing)})"
            )
        config = TrainConfig(epochs=args.epochs, batch_size=args.batch,
                             tau0=args.tau0, tauC=args.tauC, **common)
        name = "custom"
    if config.k > d:
        raise ParameterError(f"k={config.k} exceeds the scene's {d} bands")
    return config, name


def _manifest(args, config: TrainConfig, schedule_name: str) -> dict:
    return {
        "toolkit": "dropcae",
        "version": __version__,
        "backend": backend_name(),
        "command": "train",
        "input": args.input,
        "out": args.out,
        "seed": args.seed,
        "schedule": schedule_name,
        "config": {
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "k": config.k,
            "base_lr": config.base_lr,
            "lr_milestones": list(config.lr_milestones),
            "lr_gamma": config.lr_gamma,
            "lambda": config.lam,
            "tau0": config.tau0,
            "tauC": config.tauC,
            "hidden": config.hidden,
            "full_bce": config.full_bce,
        },
    }


def _cmd_train(args) -> int:
    matrix = flatten_labeled(read_hsic(args.input))
    config, schedule_name = _train_config(args, matrix.d)
    subset, trace = train(matrix, config)
    os.makedirs(args.out, exist_ok=True)
    atomic_write_bytes(os.path.join(args.out, "subset.json"),
                       _json_bytes(subset.to_json_dict()))
    atomic_write_bytes(os.path.join(args.out, "trace.json"),
                       _json_bytes(trace.to_json_dict()))
    atomic_write_bytes(os.path.join(args.out, "manifest.json"),
                       _json_bytes(_manifest(args, config, schedule_name)))
    return 0


def _cmd_eval(args) -> int:
    matrix = flatten_labeled(read_hsic(args.input))
    if args.all_bands:
        subset = BandSubset(list(range(matrix.d)), np.ones(matrix.d), matrix.d)
    else:
        with open(args.subset, "r", encoding="utf-8") as fh:
            subset = BandSubset.from_json_dict(json.load(fh))
    if args.runs < 1:
        raise ParameterError(f"--runs must be >= 1, got {args.runs}")
    spec = SplitSpec(args.train_fraction, args.stratified, args.seed)
    report = evaluate_subset(matrix, subset, runs=args.runs, spec=spec,
                             svm_epochs=args.svm_epochs, svm_lr=args.svm_lr,
                             svm_reg=args.svm_reg, bins=args.bins)
    for r in report.runs:
        if not (0.0 <= r.oa <= 1.0 and 0.0 <= r.aa <= 1.0 and -1.0 <= r.kappa <= 1.0):
            raise DataError(f"metric out of legal range in run {r.seed}")
    os.makedirs(args.out, exist_ok=True)
    atomic_write_bytes(os.path.join(args.out, "report.json"),
                       _json_bytes(report.to_json_dict()))
    atomic_write_bytes(os.path.join(args.out, "bands.csv"),
                       report.bands_csv().encode("utf-8"))
    return 0


def _cmd_synth(args) -> int:
    matrix, planted = synth_scene(args.d, args.k, args.n, args.sigma, args.seed)
    cube = matrix_to_cube(matrix)
    write_hsic(cube, args.out)
    truth = {
        "d": args.d,
        "k": args.k,
        "n": args.n,
        "noise_sigma": args.sigma,
        "seed": args.seed,
        "planted": [int(i) for i in planted],
    }
    atomic_write_bytes(args.out + ".planted.json", _json_bytes(truth))
    return 0


_COMMANDS = {"train": _cmd_train, "eval": _cmd_eval, "synth": _cmd_synth}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"dropcae: {exc}", file=sys.stderr)
        return 2
    except (DataError, DomainError, FormatError, FileNotFoundError,
            IsADirectoryError, json.JSONDecodeError) as exc:
        print(f"dropcae: {exc}", file=sys.stderr)
        return 3
    except TrainingError as exc:
        print(f"dropcae: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
