"""Command-line entry point: ``ginls {simulate, experiment, check-operators, version}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .. import __version__
from .config import ConfigError, load_config
from .experiments import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXPERIMENTS, run_simulation

log = logging.getLogger("ginls")


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ginls", description="gINLS pseudo-spectral laboratory")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE", help="dotted override, repeatable"
        )
        p.add_argument("--seed", type=_seed, help="seed for random data and perturbations")
        p.add_argument("--workers", type=int, help="worker processes for independent trajectories")
        p.add_argument("--no-plots", action="store_true", help="skip matplotlib figures")

    common(sub.add_parser("simulate", help="evolve one datum and write diagnostics"))
    ex = sub.add_parser("experiment", help="run a headline experiment")
    ex.add_argument("name", choices=sorted(EXPERIMENTS))
    common(ex)
    co = sub.add_parser("check-operators", help="run the oracle suite against the spectral operators")
    co.add_argument("--out", default="runs", help="output directory")
    co.add_argument("--no-plots", action="store_true")
    sub.add_parser("version", help="print the version")
    return ap


def _load(args):
    return load_config(args.config, args.override, seed=args.seed, out=args.out, workers=args.workers)


def _write_table(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow(["%.17g" % v if isinstance(v, float) else v for v in r])


def cmd_simulate(args) -> int:
    cfg = _load(args)
    log.info("simulate %s to T=%g on n=%d", cfg.initial["kind"], cfg.T, cfg.grid.n)
    res = run_simulation(cfg)
    print(f"timeseries\t{res.timeseries}")
    for s in res.snapshots:
        print(f"snapshot\t{s}")
    if not args.no_plots and res.records:
        from .io import read_timeseries
        from .plotting import plot_timeseries

        _, data = read_timeseries(res.timeseries)
        print(f"figure\t{plot_timeseries(data, res.timeseries.with_suffix('.png'))}")
    if res.failure:
        print(f"error: {res.failure}", file=sys.stderr)
    return res.status


def cmd_experiment(args) -> int:
    cfg = _load(args)
    log.info("experiment %s, grid n=%d L=%g", args.name, cfg.grid.n, cfg.grid.length)
    rep = EXPERIMENTS[args.name](cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if rep.failure:
        print(f"error: {rep.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    table = out / f"{args.name}.csv"
    _write_table(table, rep.columns, rep.table)
    summary = out / f"{args.name}_summary.json"
    summary.write_text(json.dumps({"passed": rep.passed, **rep.summary}, indent=2, sort_keys=True, default=float))
    print(f"table\t{table}")
    print(f"summary\t{summary}")
    for k, v in rep.summary.items():
        print(f"{k}\t{v}")
    print(f"passed\t{rep.passed}")
    if not args.no_plots:
        from .plotting import plot_experiment

        print(f"figure\t{plot_experiment(rep, out / f'{args.name}.png')}")
    return EXIT_OK


def cmd_check_operators(args) -> int:
    from .checks import run_operator_checks

    rows = run_operator_checks()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "check_operators.csv", ("group", "name", "error", "tolerance", "passed"), rows)
    for g, name, err, tol, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'}\t{g}\t{name}\t{err:.3e}\t{tol:.0e}")
    if not args.no_plots:
        from .plotting import plot_operator_checks

        plot_operator_checks(rows, out / "check_operators.png")
    return EXIT_OK if all(r[4] for r in rows) else EXIT_NUMERICAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    handler = {"simulate": cmd_simulate, "experiment": cmd_experiment, "check-operators": cmd_check_operators}
    try:
        return handler[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # experiment preconditions (sweep sizes and the like) are configuration problems
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
