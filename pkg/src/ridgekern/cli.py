"""Command-line entry point ``ridgekern``.

Exit codes: 0 when every criterion passes, 1 when a criterion fails, 2 on
configuration, hypothesis, model-format or IO errors. Errors print a
one-line message and a JSON record ``{"error", "message", "field"}`` on
stderr. All files go under ``--out``.
"""
import argparse
import json
import os
import sys

import numpy as np

from .config import MAX_SEED, SCHEMA_VERSION, load_config, parse_config
from .errors import ConfigError, HypothesisError, ModelFormatError
from .experiments import Table, read_points_csv, run_experiment, write_report, write_table
from .networks import load_model, predict, save_model

EXPERIMENT_COMMANDS = ("synth", "train", "mc-rate", "uniform-bound", "dichotomy", "smoothing",
                       "psd-contrast")


class CliError(Exception):
    def __init__(self, kind, message, field=None):
        super().__init__(message)
        self.kind, self.field = kind, field


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64 - 1]")
    return v


def _jobs(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("jobs must be >= 1")
    return v


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ridgekern", description="Ridge-kernel synthesis and random-kernel network experiments.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p, needs_out=True):
        p.add_argument("--config", metavar="PATH", help="experiment config (JSON)")
        if needs_out:
            p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=_seed, metavar="U64", help="override the config master seed")
        p.add_argument("--jobs", type=_jobs, default=1, metavar="N", help="worker threads")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    for name in EXPERIMENT_COMMANDS:
        common(sub.add_parser(name, help=f"run the {name} experiment"))
    p = sub.add_parser("predict", help="evaluate a saved model on points from a CSV file")
    p.add_argument("--model", metavar="PATH", required=True)
    p.add_argument("--points", metavar="CSV", required=True)
    p.add_argument("--out", metavar="DIR", required=True)
    p.add_argument("--quiet", action="store_true")
    common(sub.add_parser("validate-config", help="check a config and echo resolved components"),
           needs_out=False)
    return parser


def _load(args, experiment):
    if args.config is None:
        if experiment is None:
            raise ConfigError("validate-config needs --config", "config")
        cfg = parse_config({"schema_version": SCHEMA_VERSION, "experiment": experiment})
    else:
        cfg = load_config(args.config)
    if experiment is not None and cfg.experiment != experiment:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {experiment!r}", "experiment")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg):
    out = args.out if args.out is not None else cfg.out
    if out is None:
        raise ConfigError("no output directory (pass --out or set 'out')", "out")
    if cfg is not None and args.out is None and not os.path.isabs(out):
        out = os.path.join(cfg.base_dir, out)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise CliError("IOError", f"cannot create output directory: {exc.strerror}", "out") from None
    return out


def _say(args, msg):
    if not args.quiet:
        print(msg)


def cmd_experiment(args):
    cfg = _load(args, args.command)
    out = _out_dir(args, cfg)
    report = run_experiment(cfg, jobs=args.jobs)
    write_report(report, out)
    if args.command == "train":
        save_model(report.data, os.path.join(out, "model.json"))
    for name, crit in report.criteria.items():
        verdict = "SKIP" if crit.passed is None else ("PASS" if crit.passed else "FAIL")
        _say(args, f"{verdict} {name}")
    _say(args, f"{args.command}: {'passed' if report.passed else 'FAILED'} "
               f"({report.seconds:.1f} s, outputs in {out})")
    return 0 if report.passed else 1


def cmd_validate(args):
    cfg = _load(args, None)
    print(json.dumps({"valid": True, "resolved": cfg.resolved()}, indent=2))
    return 0


def cmd_predict(args):
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise CliError("IOError", f"cannot read model: {exc.strerror}", "model") from None
    try:
        X = read_points_csv(args.points, model.d)
    except OSError as exc:
        raise CliError("IOError", f"cannot read points: {exc.strerror}", "points") from None
    except ValueError as exc:
        raise CliError("InputError", str(exc), "points") from None
    y = np.atleast_1d(predict(model, X))
    out = args.out
    try:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, "predictions.csv")
        write_table(Table(("index", "prediction"), [(i, float(v)) for i, v in enumerate(y)]), path)
    except OSError as exc:
        raise CliError("IOError", f"cannot write predictions: {exc.strerror}", "out") from None
    _say(args, f"wrote {len(y)} predictions to {path}")
    return 0


def _error(exc, kind=None, field=None):
    kind = kind or type(exc).__name__
    field = getattr(exc, "field", field)
    print(f"error: {exc}", file=sys.stderr)
    print(json.dumps({"error": kind, "message": str(exc), "field": field}), file=sys.stderr)
    return 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            return cmd_validate(args)
        if args.command == "predict":
            return cmd_predict(args)
        return cmd_experiment(args)
    except CliError as exc:
        return _error(exc, exc.kind, exc.field)
    except (ConfigError, HypothesisError, ModelFormatError) as exc:
        return _error(exc)
    except OSError as exc:
        return _error(exc, "IOError")


if __name__ == "__main__":
    sys.exit(main())
