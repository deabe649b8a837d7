"""Convergence study on the builtin tet cube meshes for several degrees.

    python3 scripts/convergence_study.py --degrees 0 1 --out runs/study

Runs the CLI converge mode once per degree and prints the rate tables.
The default mesh lists match the acceptance study; pass --extended to add
one refinement level per degree (slower, minutes on a single core).
"""

import argparse
import csv
from pathlib import Path

from hho_mhd.cli import RunConfig, run

MESHES = {0: [2, 3, 4, 6], 1: [1, 2, 3, 4], 2: [1, 2, 3]}
EXTENDED = {0: [2, 3, 4, 6, 8], 1: [2, 3, 4, 5], 2: [1, 2, 3, 4]}


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--degrees", type=int, nargs="+", default=[0, 1])
    p.add_argument("--out", default="runs/study")
    p.add_argument("--extended", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    table = EXTENDED if args.extended else MESHES
    for k in args.degrees:
        out = Path(args.out) / f"k{k}"
        print(f"== k = {k}, n = {table[k]}")
        run(RunConfig(mode="converge", cube=table[k], degree=k, out=str(out), workers=args.workers))
        with open(out / "rates.csv") as fh:
            for row in csv.DictReader(fh):
                print("  h %.3f -> %.3f: " % (float(row["h_coarse"]), float(row["h_fine"]))
                      + " ".join(f"{key}={float(v):.2f}" for key, v in row.items()
                                 if key.startswith("E_")))


if __name__ == "__main__":
    main()
