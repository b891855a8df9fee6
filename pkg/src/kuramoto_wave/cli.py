"""Command-line entry point: ``kuramoto-wave <subcommand> --config PATH``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, ExperimentConfig, load_config

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 1, 2, 3

_RUNNERS = {
    "stationary": harness.run_stationary,
    "spectrum": harness.run_spectrum,
    "drift": harness.run_drift,
    "simulate": harness.run_simulate,
    "pde": harness.run_pde,
    "expand": harness.run_expand,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kuramoto-wave", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in _RUNNERS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--seed", type=int, default=None, help="overrides sim.seed")
        s.add_argument("--out", type=Path, default=Path("out") / name)
    r = sub.add_parser("reproduce", help="emit the data behind fig1, fig2 or fig3")
    r.add_argument("figure", choices=sorted(harness.FIGURES))
    r.add_argument("--config", type=Path, default=None)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", type=Path, default=None)
    a = sub.add_parser("acceptance", help="run the acceptance suite")
    a.add_argument("suite", choices=["fast", "full"])
    a.add_argument("--out", type=Path, default=Path("out") / "acceptance")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "acceptance":
            from .acceptance import run_suite, write_verdicts

            args.out.mkdir(parents=True, exist_ok=True)
            results = run_suite(args.suite)
            write_verdicts(results, args.out / "verdicts.csv")
            return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE
        if args.command == "reproduce":
            cfg = load_config(args.config) if args.config else ExperimentConfig()
            out = args.out or Path("out") / args.figure
            man = harness.run_reproduce(args.figure, out, seed=args.seed, cfg=cfg)
        else:
            cfg = load_config(args.config)
            seed = cfg.seed if args.seed is None else args.seed
            man = _RUNNERS[args.command](cfg, args.out, seed=seed)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"kuramoto-wave: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except harness.NumericalFailure as exc:
        print(f"kuramoto-wave: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for key, val in man.derived.items():
        if not isinstance(val, (list, dict)):
            print(f"{key} = {val}")
    print(f"outputs written to {Path(args.out or '.').resolve() if args.command != 'reproduce' else out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
