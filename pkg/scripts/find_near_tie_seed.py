"""Search master seeds for a two-scenario instance whose best coverages differ by one UE.

Used to pick the seed of configs/near_tie.yaml: both optima must be unique and
the best beam assignments of the two scenarios must differ.
"""

import argparse

from sectorlearn.config import load_config
from sectorlearn.env import BeamEnvironment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/near_tie.yaml")
    ap.add_argument("--seeds", type=int, default=400)
    ap.add_argument("--gap", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config)
    a, b = cfg.mobility.scenario_ids()[:2]
    for seed in range(args.seeds):
        cfg.seed = seed
        env = BeamEnvironment(cfg)
        ea, eb = env.entry((a, 0)), env.entry((b, 0))
        if (abs(ea.oracle.best_reward - eb.oracle.best_reward) == args.gap
                and ea.oracle.best_assignment != eb.oracle.best_assignment
                and ea.unique_optimum and eb.unique_optimum):
            print(seed, a, ea.oracle.best_assignment, ea.oracle.best_reward,
                  b, eb.oracle.best_assignment, eb.oracle.best_reward)


if __name__ == "__main__":
    main()
