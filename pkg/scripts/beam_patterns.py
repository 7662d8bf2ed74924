"""Dump elevation and azimuth gain cuts of every beam in a config's pools as CSV.

Columns: sector,beam,cut,angle_deg,gain_db. The elevation cut is taken at
azimuth 0 and the azimuth cut at each beam's e-tilt.
"""

import argparse
import sys

import numpy as np

from sectorlearn.array_beams import beam_gain_db, build_pool
from sectorlearn.config import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", required=True)
    ap.add_argument("--step", type=float, default=0.25, help="angular grid step, degrees")
    ap.add_argument("--out", default=None, help="CSV path (default stdout)")
    args = ap.parse_args()

    cfg = load_config(args.config)
    grid = np.arange(-90.0, 90.0 + args.step / 2, args.step)
    dest = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    dest.write("sector,beam,cut,angle_deg,gain_db\n")
    for m, specs in enumerate(cfg.pool_specs()):
        for beam in build_pool(cfg.array, specs):
            elev = beam_gain_db(cfg.array, beam.w, np.zeros_like(grid), grid)
            az = beam_gain_db(cfg.array, beam.w, grid, np.full_like(grid, beam.spec.etilt_deg))
            for cut, gains in (("elev", elev), ("az", az)):
                for a, g in zip(grid, gains):
                    dest.write(f"{m},{beam.index},{cut},{a:.2f},{g:.4f}\n")
    if args.out:
        dest.close()


if __name__ == "__main__":
    main()
