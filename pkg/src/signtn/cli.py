"""Command-line entry point: ``signtn <experiment> [flags]``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import FormatError, SignTNError
from .harness import PLOT_STYLES, Experiment, emit_plot_data, load_config, run_experiment

SUBCOMMANDS = [e.value for e in Experiment]



def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signtn", description="Sign-problem and entanglement experiments on random tensor networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON file with experiment parameters")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="raw CSV path; aggregates go to <out>.agg.csv")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--D", type=int, nargs="+", help="bond dimensions")
        p.add_argument("--lambda", dest="lam", type=float, nargs="+", help="shift values")
        p.add_argument("--lambdaD", type=float, nargs="+", help="shift values in units of 1/D")
        p.add_argument("--mu", type=float, nargs="+", help="bias values mu = lambda*D")
        p.add_argument("--W", type=int, nargs="+", help="strip or block widths")
        p.add_argument("--d", type=int, nargs="+", help="PEPS physical dimensions")
        p.add_argument("--chi", type=int, help="boundary bond dimension")
        p.add_argument("--trials", type=int, help="realizations per grid point")
        p.add_argument("--K", type=int, help="Monte Carlo samples")
        p.add_argument("--L", type=int, help="cylinder length")
        p.add_argument("--kind", nargs="+", help="ensemble kinds")
        p.add_argument("--target", nargs="+", help="interpolation targets")
        p.add_argument("--model", nargs="+", help="statmech models")
        p.add_argument("--mode", nargs="+", help="gauge modes")
        p.add_argument("--plot", help="also write plot data in this style")
    return parser


# flags whose experiment parameter is a scalar
_SCALAR = {
    "possum": {"D", "d", "W"},
    "gauge": {"D", "d", "W"},
    "phase": {"model"},
    "entropy": {"kind"},
    "interp": {"kind"},
}


def _overrides(args) -> dict:
    names = ["D", "lambdaD", "mu", "W", "d", "chi", "trials", "K", "L", "kind", "target", "model", "mode"]
    ov = {n: getattr(args, n) for n in names}
    ov["lambda"] = args.lam
    scalar = _SCALAR.get(args.command, set())
    for n in scalar:
        if isinstance(ov.get(n), list):
            ov[n] = ov[n][0]
    ov.update(seed=args.seed, out=args.out, workers=args.workers)
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.plot and args.plot not in PLOT_STYLES:
            raise FormatError(f"unknown plot style {args.plot!r}; choose from {sorted(PLOT_STYLES)}")
        cfg = load_config(args.config, args.command, _overrides(args))
        result = run_experiment(cfg)
        if args.plot:
            emit_plot_data(result["raw"], args.plot)
    except SignTNError as exc:
        print(f"signtn: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
