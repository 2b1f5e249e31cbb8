"""Command-line entry point: ``txrelay run|sweep|report|validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, load_config
from .engine import build_world
from .runner import report_dir, run_single, run_sweep
from .topology import TopologyError

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _apply_flags(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    run = cfg.run
    if getattr(args, "seed", None) is not None:
        run = replace(run, seed=args.seed)
    if getattr(args, "out", None) is not None:
        run = replace(run, out=args.out)
    if getattr(args, "trace", False):
        run = replace(run, trace=True)
    return replace(cfg, run=run)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="txrelay", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--out", help="override run.out")
        p.add_argument("--trace", action="store_true", help="write event traces")

    common(sub.add_parser("run", help="execute one simulation"))
    sweep = sub.add_parser("sweep", help="execute every sweep cell x replica")
    common(sweep)
    sweep.add_argument("--jobs", type=int, default=1)
    report = sub.add_parser("report", help="re-aggregate a sweep output directory")
    report.add_argument("dir")
    validate = sub.add_parser("validate", help="check a config and its topology")
    validate.add_argument("config")
    validate.add_argument("--seed", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            print(report_dir(args.dir))
            return EXIT_OK
        cfg = _apply_flags(load_config(args.config), args)
        if args.command == "validate":
            topo, _ = build_world(cfg, cfg.run.seed)
            print(f"ok: {len(topo.nodes)} nodes, {len(topo.links)} links")
        elif args.command == "run":
            metrics = run_single(cfg)
            agg = metrics["aggregates"]
            print(
                f"txs={agg['num_txs']} accuracy={agg['first_spy_accuracy']} "
                f"median_t90={agg['median_t90']} quiescent={metrics['quiescent']}"
            )
        else:
            print(run_sweep(cfg, jobs=args.jobs))
    except (ConfigError, TopologyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
