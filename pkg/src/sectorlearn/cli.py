"""Command-line entry point: ``sectorlearn {gen-dataset,train,eval,oracle,metrics}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import harness
from .config import ExperimentConfig, load_config
from .errors import ConfigError
from .metrics import compute_metrics, read_trace, write_metrics

log = logging.getLogger("sectorlearn")


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="experiment YAML")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", default=None, help="output directory (or file for gen-dataset/oracle)")
    p.add_argument("--episodes", type=int, default=None, help="override the episode budget")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sectorlearn", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="write scenario-specific snapshots in ray-trace format")
    _common(p)
    p.add_argument("--horizon", type=int, default=16, help="number of steps to emit")

    p = sub.add_parser("train", help="offline training against the simulated network")
    _common(p)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")

    p = sub.add_parser("eval", help="greedy rollout of a trained checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--steps", type=int, default=1000)

    p = sub.add_parser("oracle", help="dump the exhaustive-search trace")
    _common(p)
    p.add_argument("--steps", type=int, default=None, help="default: the full training budget")

    p = sub.add_parser("metrics", help="recompute ASD/AM from a per-step trace")
    _common(p, config_required=False)
    p.add_argument("--trace", required=True)
    p.add_argument("--window", type=int, default=200)
    return ap


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.episodes is not None:
        cfg.training = dataclasses.replace(cfg.training, episodes=args.episodes)
    if args.out is not None and args.command in ("train", "eval"):
        cfg.output_dir = args.out
    return cfg.validate()


def _run(args) -> int:
    if args.command == "metrics":
        trace = read_trace(args.trace)
        n_sectors = len(trace["actions"][0]) if trace["actions"] else 1
        rows = compute_metrics(trace, args.window)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                write_metrics(rows, n_sectors, fh)
        else:
            write_metrics(rows, n_sectors, sys.stdout)
        return harness.EXIT_OK

    cfg = _resolve(args)
    if args.command == "gen-dataset":
        out = Path(args.out or Path(cfg.output_dir) / "dataset.csv")
        harness.gen_dataset(cfg, out, args.horizon)
        print(out)
        return harness.EXIT_OK
    if args.command == "oracle":
        steps = args.steps if args.steps is not None else cfg.training.episodes * cfg.training.steps_per_episode
        out = Path(args.out or Path(cfg.output_dir) / "oracle_trace.csv")
        out.parent.mkdir(parents=True, exist_ok=True)
        harness.write_oracle_file(cfg, steps, out)
        print(out)
        return harness.EXIT_OK
    if args.command == "eval":
        result = harness.run_eval(cfg, args.checkpoint, args.steps, out_dir=cfg.output_dir)
        print(json.dumps(result, sort_keys=True))
        return harness.EXIT_OK

    def progress(step, stats):
        log.info("step %d eps %.4f asd %.3f am %.3f", step, stats["epsilon"], stats["asd"], stats["am"])

    arts = harness.run_offline_training(cfg, cfg.output_dir, resume=args.resume, progress=progress)
    print(json.dumps(arts.summary, sort_keys=True))
    return harness.EXIT_OK if arts.converged else harness.EXIT_NOT_CONVERGED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return harness.EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
