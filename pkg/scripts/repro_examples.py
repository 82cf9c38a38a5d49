"""Regenerate the worked examples, orbits, sweeps and branch tables into one directory.

    python scripts/repro_examples.py --out repro_out --n 10000
"""

import argparse
import sys

from planktonmap.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="repro_out")
    ap.add_argument("--n", type=int, default=10_000, help="iterations per orbit")
    args = ap.parse_args()
    sys.exit(main(["repro", "--output", args.out, "--n", str(args.n)]))
