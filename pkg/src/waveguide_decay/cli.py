"""Command-line front end: ``waveguide-decay {decay,sweep,split,fit,selftest}``.

Exit codes: 0 success, 1 failed self-test or numerical failure, 2 invalid
arguments or config, 3 I/O failure.
"""
import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import load_config
from .decay_analysis import (
    FitWindow,
    fit_exponential,
    make_split_spec,
    residual_report,
    split_compare,
    sweep_rate_vs_n,
)
from .ensemble_sampler import CloudSpec
from .errors import AccuracyError, EmptyEnsembleError, FitError, ValidationError
from .io import (
    SWEEP_COLUMNS,
    clean_json,
    metadata_record,
    read_decay_csv,
    write_decay_csv,
    write_json,
    write_table,
)
from .montecarlo_engine import run_ensemble
from .selftest import FAULTS, run_selftest

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load(path):
    if not os.path.isfile(path):
        raise CliError(EXIT_CONFIG, f"config file not found: {path}")
    try:
        return load_config(path)
    except ValidationError as exc:
        raise CliError(EXIT_CONFIG, f"invalid config {path}: {exc}")
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_CONFIG, f"cannot read config {path}: {exc}")


def _outdir(cfg):
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {cfg.output_dir}: {exc}")
    return cfg.output_dir


def _fit_record(curve, window, background):
    fit = fit_exponential(curve, window, background)
    rep = residual_report(curve, fit)
    rec = fit.to_dict()
    rec.update(chi2_reduced=rep.chi2_reduced, dof=rep.dof, excluded_bins=rep.excluded_bins)
    return rec


def cmd_decay(args):
    cfg = _load(args.config)
    out = _outdir(cfg)
    t0 = time.perf_counter()
    curve = run_ensemble(cfg.spec, workers=args.workers)
    wall = time.perf_counter() - t0
    fits = {
        "fast": _fit_record(curve, cfg.fast_window, cfg.fast_background),
        "slow": _fit_record(curve, cfg.slow_window, cfg.slow_background),
    }
    write_decay_csv(os.path.join(out, "decay.csv"), curve, cfg.float_format)
    write_json(os.path.join(out, "fits.json"), fits)
    write_json(os.path.join(out, "metadata.json"), metadata_record(
        cfg.to_dict(), "decay", wall, n_effective=curve.n_effective,
        dark_state_count=curve.dark_state_count))
    print(f"fast rate {fits['fast']['rate']:.4f} +- {fits['fast']['rate_stderr']:.4f}, "
          f"slow rate {fits['slow']['rate']:.4f} +- {fits['slow']['rate_stderr']:.4f}")
    return EXIT_OK


def _parse_n_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(EXIT_CONFIG, f"--n-list must be comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise CliError(EXIT_CONFIG, f"--n-list entries must be positive integers, got {text!r}")
    return values


def _random_cloud(cfg, command):
    if not isinstance(cfg.spec.cloud, CloudSpec):
        raise CliError(EXIT_CONFIG, f"{command} needs a random cloud; config uses positions_file")


def cmd_sweep(args):
    n_values = _parse_n_list(args.n_list)
    cfg = _load(args.config)
    _random_cloud(cfg, "sweep")
    out = _outdir(cfg)
    t0 = time.perf_counter()
    res = sweep_rate_vs_n(cfg.spec, n_values, cfg.fast_window, args.workers, cfg.fast_background,
                          progress=lambda n, f: print(f"N={n}: {f.rate:.4f} +- {f.rate_stderr:.4f}"))
    wall = time.perf_counter() - t0
    rows = zip(res.n_atoms, res.od_equivalent, res.rates, res.rate_stderr)
    write_table(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, rows, cfg.float_format)
    line = res.line
    summary = {
        "slope": line.slope,
        "slope_stderr": line.slope_stderr,
        "intercept": line.intercept,
        "intercept_stderr": line.intercept_stderr,
        "slope_intercept_covariance": line.covariance,
        "chi2_reduced": line.chi2_reduced,
        "birge_ratio": line.birge_ratio,
        "slope_significance": line.slope / line.slope_stderr if line.slope_stderr > 0 else None,
        "n_values": res.n_atoms.tolist(),
        "window": list(cfg.fast_window),
    }
    write_json(os.path.join(out, "sweep_fit.json"), summary)
    write_json(os.path.join(out, "metadata.json"),
               metadata_record(cfg.to_dict(), "sweep", wall, n_values=res.n_atoms.tolist()))
    return EXIT_OK


def cmd_split(args):
    cfg = _load(args.config)
    _random_cloud(cfg, "split")
    if len(cfg.spec.cloud.components) != 1:
        raise CliError(EXIT_CONFIG, "split needs a single-component cloud to split")
    if args.separation < 0:
        raise CliError(EXIT_CONFIG, f"--separation must be >= 0, got {args.separation}")
    out = _outdir(cfg)
    single = cfg.spec
    split = make_split_spec(single, args.separation, args.partition, args.sub_fwhm)
    t0 = time.perf_counter()
    single_curve = run_ensemble(single, workers=args.workers)
    split_curve = run_ensemble(split, workers=args.workers)
    comp = split_compare(single, split, cfg.fast_window, precomputed=(single_curve, split_curve))
    wall = time.perf_counter() - t0
    write_decay_csv(os.path.join(out, "decay_single.csv"), single_curve, cfg.float_format)
    write_decay_csv(os.path.join(out, "decay_split.csv"), split_curve, cfg.float_format)
    rec = comp.to_dict()
    rec.update(separation_nm=args.separation, partition=args.partition,
               split_cloud=split.cloud.to_dict(), window=list(cfg.fast_window))
    write_json(os.path.join(out, "comparison.json"), rec)
    write_json(os.path.join(out, "metadata.json"), metadata_record(
        cfg.to_dict(), "split", wall, separation_nm=args.separation, partition=args.partition,
        sub_fwhm_nm=args.sub_fwhm))
    print(f"single {comp.rate_single:.4f}, split {comp.rate_split:.4f}, "
          f"difference {comp.difference:+.4f} +- {comp.combined_stderr:.4f}")
    return EXIT_OK


def cmd_fit(args):
    try:
        curve = read_decay_csv(args.csv)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.csv}: {exc}")
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc))
    try:
        window = FitWindow(*args.window)
    except ValidationError as exc:
        raise CliError(EXIT_CONFIG, str(exc))
    rec = _fit_record(curve, window, args.background)
    text = json.dumps(clean_json(rec), indent=2, sort_keys=True)
    if args.output:
        try:
            write_json(args.output, rec)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {args.output}: {exc}")
    print(text)
    return EXIT_OK


def cmd_selftest(args):
    return EXIT_OK if run_selftest(args.inject_fault) else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="waveguide-decay")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes (results do not depend on it)")
        return p

    p = with_config("decay", "ensemble decay curve with fast/slow fits")
    p.set_defaults(func=cmd_decay)
    p = with_config("sweep", "fast rate versus atom number")
    p.add_argument("--n-list", required=True, help="comma-separated atom numbers, e.g. 1,2,3")
    p.set_defaults(func=cmd_sweep)
    p = with_config("split", "single cloud versus two separated clouds")
    p.add_argument("--separation", type=float, required=True, help="center separation in nm")
    p.add_argument("--partition", choices=("weighted", "fixed"), default="weighted")
    p.add_argument("--sub-fwhm", type=float, default=None,
                   help="FWHM of each sub-cloud in nm (default: the single cloud's)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit", help="re-fit an existing decay CSV")
    p.add_argument("csv")
    p.add_argument("--window", type=float, nargs=2, default=(0.1, 1.0), metavar=("START", "END"))
    p.add_argument("--background", action="store_true", help="float a constant background")
    p.add_argument("--output", help="also write the fit record to this JSON file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("selftest", help="closed-form and oracle checks")
    p.add_argument("--inject-fault", choices=FAULTS, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FitError, EmptyEnsembleError, AccuracyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
