"""Command-line driver.

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, NonConvergenceError
from .experiment import (
    DEFAULT_LAMBDA_GRID,
    FigureId,
    Mode,
    build_config,
    parse_config_text,
    render,
    resolve,
    run_experiment,
)

EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 1, 2, 3

_EPILOG = f"""\
Defaults: energy grid 0..30 dB in 2 dB steps, B=4, mu=1, lambda grid of
{len(DEFAULT_LAMBDA_GRID)} points {DEFAULT_LAMBDA_GRID[0]}..{DEFAULT_LAMBDA_GRID[-1]}, n0=1, no
simulation unless --trials is given (mc mode requires it). Config files hold
'key = value' lines whose keys match the experiment fields (energy_grid, B,
rho, alpha, lambda_grid, mu, trials, seed, sources, n0, linear,
output_path, workers, figure_id); lists are comma separated.
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse already exits 2; keep the prefix consistent
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="feedback-jscc", description="Distortion bounds and simulations for "
                     "feedback-based analog source transmission.", epilog=_EPILOG,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    for mode in Mode:
        p = sub.add_parser(mode.value, epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
        if mode is Mode.FIGURE:
            p.add_argument("figure_id", nargs="?", type=str.upper, choices=[f.value for f in FigureId])
            p.add_argument("--figure", dest="figure_flag", type=str.upper, choices=[f.value for f in FigureId],
                           help="same as the positional figure id")
        p.add_argument("--config", type=Path, help="flat key=value config file")
        p.add_argument("--out", type=Path, help="output file (default: stdout)")
        p.add_argument("--seed", type=int, help="simulation seed (unsigned 64-bit)")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per grid point")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        p.add_argument("--linear", action="store_true", default=None,
                       help="energy grid is linear energy rather than dB over n0")
        p.add_argument("--workers", type=int, help="parallel grid-point workers")
    return parser


def _collect(args) -> tuple[dict, set[str]]:
    overrides: dict = {"__lines__": {}}
    if args.config is not None:
        overrides = parse_config_text(args.config.read_text(encoding="utf-8"))
    overrides["mode"] = Mode(args.mode)
    fig = getattr(args, "figure_flag", None) or getattr(args, "figure_id", None)
    if fig:
        overrides["figure_id"] = FigureId(fig)
    for key in ("seed", "trials", "linear", "workers"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.out is not None:
        overrides["output_path"] = str(args.out)
    explicit = set(overrides) - {"__lines__", "mode"}
    return overrides, explicit


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides, explicit = _collect(args)
        cfg = resolve(build_config(overrides), explicit)
        rows = run_experiment(cfg)
        text = render(cfg, rows, args.format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if cfg.output_path:
            Path(cfg.output_path).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
