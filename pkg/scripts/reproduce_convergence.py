"""Train one or more example configs and print the per-window ASD/AM curves.

    python3 scripts/reproduce_convergence.py configs/single_sector.yaml configs/multi_sector.yaml
"""

import argparse
import time
from pathlib import Path

from sectorlearn.config import load_config
from sectorlearn.harness import run_offline_training
from sectorlearn.metrics import compute_metrics, read_trace


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--out", default="runs", help="parent directory for run outputs")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    for path in args.configs:
        cfg = load_config(path)
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out) / cfg.name
        t0 = time.perf_counter()
        arts = run_offline_training(cfg, out)
        elapsed = time.perf_counter() - t0
        rows = compute_metrics(read_trace(arts.trace_path), cfg.training.window)
        print(f"== {cfg.name}: {arts.summary['steps']} steps, {elapsed:.0f} s, converged={arts.converged}")
        print("window_start      asd   am_joint  am_per_sector")
        for r in rows:
            per = " ".join(f"{x:.3f}" for x in r.am_sector)
            print(f"{r.window_start:12d} {r.asd:8.2f} {r.am_joint:10.3f}  {per}")


if __name__ == "__main__":
    main()
