"""Command-line entry point: ``adaptqec {simulate,sweep,fit,track,calibrate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from adaptqec.config import load_config
from adaptqec.errors import InputError, InvariantError, NumericalError
from adaptqec.harness import (
    estimate_p_log,
    fit_sweep,
    run_shards,
    summary_dict,
    to_json,
    track_rates_experiment,
    write_json,
    write_rates_csv,
)
from adaptqec.noise import calibrate_prior

EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_INVARIANT = 3

logger = logging.getLogger("adaptqec")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with key = value entries")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", help="output directory (overrides output_dir)")


def _config(args):
    cfg = load_config(args.config, args.overrides)
    if args.out is not None:
        cfg = cfg.replace(output_dir=args.out)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def cmd_simulate(args) -> None:
    cfg, out = _config(args)
    res = run_shards(cfg)
    summary = summary_dict(cfg, res)
    write_json(out / "summary.json", summary)
    if res.log is not None:
        write_rates_csv(out / "rates.csv", res.log)
    logger.info("wall time %.2f s", res.wall_time)
    print(to_json(summary["modes"]))


def cmd_sweep(args) -> None:
    cfg, out = _config(args)
    sweep = estimate_p_log(cfg)
    write_json(out / "sweep.json", sweep)
    print(to_json(sweep["modes"]))


def cmd_fit(args) -> None:
    try:
        sweep = json.loads(Path(args.input).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read sweep file {args.input}: {exc}") from None
    modes = sweep.get("modes") if isinstance(sweep, dict) else None
    if not isinstance(modes, dict) or not modes:
        raise InputError(f"{args.input} has no per-mode results")
    if args.mode is not None:
        if args.mode not in modes:
            raise InputError(f"mode {args.mode!r} not in sweep ({sorted(modes)})")
        fit = fit_sweep(sweep, args.mode).as_dict()
    elif len(modes) == 1:
        fit = fit_sweep(sweep, next(iter(modes))).as_dict()
    else:
        fit = {m: fit_sweep(sweep, m).as_dict() for m in modes}
    write_json(Path(args.output), fit)
    print(to_json(fit))


def cmd_track(args) -> None:
    cfg, out = _config(args)
    log, summary = track_rates_experiment(cfg)
    write_rates_csv(out / "rates.csv", log)
    write_json(out / "track.json", summary)
    print(to_json(summary["tracking"]))


def cmd_calibrate(args) -> None:
    f0, sf = calibrate_prior(args.mean, args.sd)
    print(f"f0_mean={f0:.17g} sigma_f={sf:.17g}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptqec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="closed-loop memory experiment")
    _add_config_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="logical error probability over distances")
    _add_config_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="exponential fit of a sweep output")
    p.add_argument("input", help="sweep.json")
    p.add_argument("--mode", help="weights mode to fit")
    p.add_argument("--output", default="fit.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("track", help="rate-tracking time series")
    _add_config_args(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("calibrate", help="OU prior parameters from rate mean and sd")
    p.add_argument("mean", type=float)
    p.add_argument("sd", type=float)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


if __name__ == "__main__":
    sys.exit(main())
