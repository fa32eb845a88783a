"""Command-line front end.

    crmac run                     single operating point
    crmac sweep --param eta --values 0.3,0.5,0.7
    crmac figure 6                preset sweeps 4..8
    crmac analyze                 analytical columns only, no simulation

Every command writes results.csv, scenario.ini (the effective configuration),
a plot-data CSV and a PNG into --out.

Exit codes: 0 success, 1 configuration error, 2 runtime or I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, ScenarioConfig, load_config
from .experiment import (CHANNEL_KEYS, FIGURES, SCENARIO_KEYS, SWEEP_PARAMS, SweepSpec,
                         apply_overrides, emit_outputs, fmt, pin_baseline_p,
                         run_experiment)

log = logging.getLogger("crmac")


def _common(parser, default):
    """Flags accepted both before and after the subcommand."""
    d = (lambda v: v) if default else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--config", default=d(None), help="scenario file (default: reference scenario)")
    parser.add_argument("--seed", type=int, default=d(None), help="master seed")
    parser.add_argument("--slots", type=int, default=d(None), help="slots per replication")
    parser.add_argument("--reps", type=int, default=d(None), help="replications per point")
    parser.add_argument("--out", default=d("out"), help="output directory (default: out)")
    parser.add_argument("--no-plot", action="store_true", default=d(False),
                        help="skip the PNG")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def _values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _assignment(text: str):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key = key.strip()
    if key not in CHANNEL_KEYS and key not in SCENARIO_KEYS:
        raise argparse.ArgumentTypeError(f"unknown field {key!r}")
    val = val.strip()
    if key in ("p", "baseline_p") and val == "auto":
        return key, val
    try:
        return key, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{key}: not a number: {val!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crmac", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(parser, default=True)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _common(common, default=False)

    def scheme_opts(p):
        p.add_argument("--scheme", action="append", choices=("random", "negotiate", "memoryless",
                                                             "improved"),
                       help="restrict to these schemes (repeatable)")
        p.add_argument("--case", action="append", type=int, choices=(1, 2),
                       help="restrict proposed schemes to these cases (repeatable)")
        p.add_argument("--set", action="append", type=_assignment, default=[], metavar="KEY=VALUE",
                       help="override a scenario or channel field")

    p = sub.add_parser("run", parents=[common], help="simulate one operating point")
    scheme_opts(p)
    p = sub.add_parser("sweep", parents=[common], help="sweep one parameter")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, type=_values)
    scheme_opts(p)
    p = sub.add_parser("figure", parents=[common], help="preset sweep for figure 4..8")
    p.add_argument("number", type=int, choices=sorted(FIGURES))
    p = sub.add_parser("analyze", parents=[common], help="analytical throughput and tuned p only")
    p.add_argument("--param", choices=SWEEP_PARAMS)
    p.add_argument("--values", type=_values, default=[])
    scheme_opts(p)
    return parser


def _config(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    for flag, name in (("seed", "seed"), ("slots", "num_slots"), ("reps", "num_replications")):
        if getattr(args, flag) is not None:
            changes[name] = getattr(args, flag)
    if getattr(args, "scheme", None):
        changes["schemes"] = tuple(dict.fromkeys(args.scheme))
    if getattr(args, "case", None):
        changes["cases"] = tuple(dict.fromkeys(args.case))
    return config.replace(**changes) if changes else config


def _summary(rows, out=sys.stdout):
    cols = ("param_value", "scheme", "case", "p", "sim_throughput_bps", "ana_throughput_bps",
            "pu_collision")
    print("  ".join(f"{c:>18}" for c in cols), file=out)
    for r in rows:
        cells = []
        for c in cols:
            v = r[c]
            cells.append(f"{v:>18}" if isinstance(v, str) else f"{fmt(v)[:18]:>18}")
        print("  ".join(cells), file=out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s", datefmt="%H:%M:%S")
    try:
        config = _config(args)
        overrides = dict(getattr(args, "set", []))
        figure = None
        simulate = True
        if args.command == "run":
            sweep = SweepSpec("eta", (), overrides)
        elif args.command == "sweep":
            sweep = SweepSpec(args.param, args.values, overrides)
        elif args.command == "figure":
            figure = args.number
            sweep = FIGURES[figure]
        else:
            simulate = False
            sweep = SweepSpec(args.param or "eta", args.values if args.param else (), overrides)
            if args.values and not args.param:
                raise ConfigError("analyze: --values needs --param")
        rows = run_experiment(config, sweep, simulate=simulate)
        effective = apply_overrides(config, sweep.overrides)
        if sweep.values and sweep.param != "p":
            effective = pin_baseline_p(effective)
        files = emit_outputs(rows, args.out, effective, figure=figure, plots=not args.no_plot)
    except ConfigError as exc:
        print(f"crmac: configuration error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"crmac: error: {exc}", file=sys.stderr)
        return 2
    _summary(rows)
    for f in files:
        print(f"wrote {f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
