"""Discrete property probes (skew symmetry, divergence, energy identity, constants).

    python3 scripts/property_probe.py --degree 1 --cube 2 3

Thin wrapper over the CLI probe mode; exits nonzero on any violated check.
"""

import argparse
import sys

from hho_mhd.cli import RunConfig, run


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--degree", type=int, default=0)
    p.add_argument("--cube", type=int, nargs="+", default=[2, 3])
    p.add_argument("--out", default="runs/probe")
    args = p.parse_args()
    return run(RunConfig(mode="probe", cube=args.cube, degree=args.degree, out=args.out))


if __name__ == "__main__":
    sys.exit(main())
