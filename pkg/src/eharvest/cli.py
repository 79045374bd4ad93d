"""Command-line entry point.

Exit codes: 0 success, 1 config error, 2 verification failure,
3 enumeration skipped by the guard.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import oracle
from .config import ConfigError, ExperimentConfig, load_config, preset
from .experiments import (COMPARE_HEADER, SIM_HEADER, compare_rows, csv_text, fmt, simulate_rows, solve_spec,
                          sweep_rows, table_value, verify_config)
from .model import SpecError

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_GUARD = 0, 1, 2, 3


def _configs(args) -> list[ExperimentConfig]:
    if args.preset:
        cfgs = preset(args.preset)
    elif args.config:
        cfgs = [load_config(args.config)]
    else:
        raise ConfigError(["--config or --preset is required"])
    return [c.with_overrides(seed=args.seed, paths=args.paths, out=args.out) for c in cfgs]


def _single(args, what: str) -> ExperimentConfig:
    cfgs = _configs(args)
    if len(cfgs) != 1:
        raise ConfigError([f"{what} needs a single config; preset {args.preset!r} has {len(cfgs)}"])
    return cfgs[0]


def _emit(text: str, out, append: bool = False) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "a" if append else "w", newline="") as fh:
        fh.write(text)


def cmd_solve(args) -> int:
    cfg = _single(args, "solve")
    if cfg.sweep and len(cfg.horizons) > 1:
        raise ConfigError(["horizons: solve needs a single horizon"])
    table = solve_spec(cfg.spec())
    if cfg.out:
        table.to_csv(cfg.out)
    print(fmt(table_value(table)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _single(args, "simulate")
    rows = simulate_rows(cfg, ("O",) if cfg.mode == "two-node" else ("optimal",))
    if cfg.out is None:
        _emit(csv_text(SIM_HEADER, rows), None)
        return EXIT_OK
    fresh = not Path(cfg.out).exists() or Path(cfg.out).stat().st_size == 0
    _emit(csv_text(SIM_HEADER if fresh else None, rows), cfg.out, append=True)
    sys.stdout.write(csv_text(None, rows))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfgs = _configs(args)
    _emit(csv_text(SIM_HEADER, sweep_rows(cfgs)), cfgs[0].out)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _single(args, "compare")
    if cfg.mode != "two-node":
        raise ConfigError(["mode: compare needs a two-node config"])
    _emit(csv_text(COMPARE_HEADER, compare_rows(cfg)), cfg.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    code = EXIT_OK
    for cfg in _configs(args):
        report = verify_config(cfg, args.table, args.guard)
        for line in report.lines:
            print(line)
        if report.failed:
            code = EXIT_VERIFY
        elif report.guard_skipped and code == EXIT_OK:
            code = EXIT_GUARD
    print("verify: FAIL" if code == EXIT_VERIFY else "verify: PASS")
    return code


def cmd_quantize(args) -> int:
    cfg = _single(args, "quantize")
    rows = []
    for i, ch in enumerate(cfg.channels, 1):
        dist = ch.distribution()
        rows += [([str(i)] if len(cfg.channels) > 1 else []) + [fmt(h), fmt(q)] for h, q in dist.support]
    header = (["node"] if len(cfg.channels) > 1 else []) + ["gain", "probability"]
    _emit(csv_text(header, rows), cfg.out)
    return EXIT_OK


COMMANDS = {
    "solve": (cmd_solve, "solve the DP and write the gamma table; print the program value"),
    "simulate": (cmd_simulate, "Monte Carlo estimate of the optimal policy's payoff"),
    "sweep": (cmd_sweep, "simulate every horizon of a sweep (or a figure preset)"),
    "compare": (cmd_compare, "optimal vs decoupled two-node policy on common sample paths"),
    "verify": (cmd_verify, "check solver tables against value iteration and policy enumeration"),
    "quantize": (cmd_quantize, "print the finite channel law used for a config"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eharvest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path)
        p.add_argument("--preset", choices=("fig1", "fig2"))
        p.add_argument("--seed", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--out")
        if name == "verify":
            p.add_argument("--table", type=Path, help="check this gamma CSV instead of a fresh solve")
            p.add_argument("--guard", type=int, default=oracle.DEFAULT_GUARD,
                           help="maximum Markov-policy count to enumerate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError(["--seed: must be >= 0"])
        if args.paths is not None and args.paths < 2:
            raise ConfigError(["--paths: must be >= 2"])
        return COMMANDS[args.command][0](args)
    except (ConfigError, SpecError) as exc:
        for problem in getattr(exc, "problems", None) or exc.violations:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
