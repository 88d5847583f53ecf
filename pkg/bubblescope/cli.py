"""Command-line entry point: ``bubblescope {scan,coint,summary,simulate,qualify-fixtures}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from bubblescope.config import FORMATS, SEED_ENV, RunConfig, build_run_config, load_config_file
from bubblescope.errors import BubblescopeError, ConfigError, NumericalError
from bubblescope.lppls import HazardParams
from bubblescope.mackinnon import REGRESSIONS
from bubblescope.pipeline import (
    run_fundamental_test,
    run_lppls_scan,
    run_qualify_fixtures,
    run_simulation,
    run_summary,
)
from bubblescope.qualification import PRESETS
from bubblescope.series import parse_month
from bubblescope.simulator import SimConfig

logger = logging.getLogger("bubblescope.cli")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


def _lags(text: str) -> str | int:
    if text == "aic":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'aic' or a non-negative integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError("lag order must be non-negative")
    return value


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Flat YAML run config (CLI flags win).")
    parser.add_argument("--out", help="Output directory (default: bubblescope-out).")
    parser.add_argument("--format", choices=FORMATS, help="Table format: json (full precision) or csv (3 decimals).")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG.")


def _window(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="Monthly price CSV: date column then one column per series.")
    parser.add_argument("--t2", help="Window end month, YYYYMM (default 201705).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bubblescope",
        description="Detect price bubbles in monthly series via cointegration and LPPLS diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_scan = sub.add_parser("scan", help="Rolling-window LPPLS scan and strength.")
    _common(p_scan)
    _window(p_scan)
    p_scan.add_argument("--t1-start", dest="t1_start", help="First window start, YYYYMM (default 200801).")
    p_scan.add_argument("--t1-end", dest="t1_end", help="Last window start, YYYYMM (default 201010).")
    p_scan.add_argument("--seed", type=int, help=f"Multistart seed (env {SEED_ENV} also works).")
    p_scan.add_argument("--preset", choices=list(PRESETS), help="Filter preset (default paper-consistent).")
    p_scan.add_argument("--n-starts", dest="n_starts", type=int, help="Starts per window (default 50).")
    p_scan.add_argument("--workers", type=int, help="Windows fitted concurrently (default 1).")

    p_coint = sub.add_parser("coint", help="Unit-root pre-checks and Engle-Granger tests.")
    _common(p_coint)
    _window(p_coint)
    p_coint.add_argument("--fundamentals", help="Fundamentals CSV on the same month grid.")
    p_coint.add_argument("--significance", type=float, help="Test level for the bubble flag (default 0.05).")
    p_coint.add_argument("--adf-regression", dest="adf_regression", choices=REGRESSIONS)
    p_coint.add_argument("--adf-lags", dest="adf_lags", type=_lags, help="'aic' or a fixed lag order.")

    p_summary = sub.add_parser("summary", help="Combine scan and coint outputs into the diagnosis table.")
    _common(p_summary)

    p_sim = sub.add_parser("simulate", help="Write a synthetic JLS price path as a price CSV.")
    p_sim.add_argument("--out", type=Path, required=True, help="CSV file to write.")
    p_sim.add_argument("--alpha", type=float, default=0.01)
    p_sim.add_argument("--beta", type=float, default=0.0, help="Hazard oscillation amplitude, |beta| < 1.")
    p_sim.add_argument("--m", type=float, default=0.5)
    p_sim.add_argument("--omega", type=float, default=8.0)
    p_sim.add_argument("--tc", type=float, default=130.0, help="Critical time in months from the path start.")
    p_sim.add_argument("--phi", type=float, default=0.0)
    p_sim.add_argument("--kappa", type=float, default=0.5)
    p_sim.add_argument("--sigma", type=float, default=0.0)
    p_sim.add_argument("--p0", type=float, default=100.0)
    p_sim.add_argument("--horizon", type=int, default=120)
    p_sim.add_argument("--step", type=float, default=1.0 / 16)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--start", default="200001", help="Month of the first observation, YYYYMM.")
    p_sim.add_argument("--label", default="simulated")
    p_sim.add_argument("--no-crash", dest="allow_crash", action="store_false", help="Condition on survival.")
    p_sim.add_argument("-v", "--verbose", action="count", default=0)

    p_fix = sub.add_parser("qualify-fixtures", help="Replay published window fits through the filter.")
    p_fix.add_argument("--preset", choices=list(PRESETS), default="paper-consistent")
    p_fix.add_argument("--fixture", action="append", type=Path, help="CSV in t1,tc,m,w,A,B,C,BmCw,Ind layout.")
    p_fix.add_argument("--out", type=Path, default=Path("bubblescope-out"))
    p_fix.add_argument("--format", choices=FORMATS, default="json")
    p_fix.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


_RUN_KEYS = (
    "input",
    "fundamentals",
    "out",
    "format",
    "t2",
    "t1_start",
    "t1_end",
    "seed",
    "preset",
    "n_starts",
    "workers",
    "significance",
    "adf_regression",
    "adf_lags",
)


def _run_config(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else None
    overrides: dict[str, Any] = {key: getattr(args, key, None) for key in _RUN_KEYS}
    return build_run_config(file_values, overrides)


def _seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env_seed = os.environ.get(SEED_ENV, "").strip()
    if not env_seed:
        return 0
    try:
        return int(env_seed)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from None


def _print_paths(paths: list[Path]) -> None:
    for path in paths:
        print(path)


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "scan":
        _print_paths(run_lppls_scan(_run_config(args)))
    elif args.command == "coint":
        _print_paths(run_fundamental_test(_run_config(args)))
    elif args.command == "summary":
        _print_paths(run_summary(_run_config(args)))
    elif args.command == "simulate":
        try:
            hp = HazardParams(
                alpha=args.alpha,
                beta_osc=args.beta,
                m=args.m,
                omega=args.omega,
                t_c=args.tc,
                phi_prime=args.phi,
                kappa=args.kappa,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        config = SimConfig(
            hp=hp,
            sigma=args.sigma,
            p0=args.p0,
            horizon=args.horizon,
            step=args.step,
            rng_seed=_seed(args),
            start=parse_month(args.start),
            allow_crash=args.allow_crash,
            label=args.label,
        )
        path, crash_time = run_simulation(config, args.out)
        print(path)
        print("crash: none" if crash_time is None else f"crash: t={crash_time:.4f} months")
    elif args.command == "qualify-fixtures":
        paths, summaries = run_qualify_fixtures(args.preset, args.out, args.format, args.fixture)
        for s in summaries:
            print(
                f"{s.table}: {s.matches}/{s.rows} rows match, "
                f"{s.replayed_positive} positive (published {s.published_positive})"
            )
        _print_paths(paths)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return _dispatch(args)
    except NumericalError as exc:
        print(f"bubblescope: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"bubblescope: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BubblescopeError, ValueError) as exc:
        print(f"bubblescope: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
