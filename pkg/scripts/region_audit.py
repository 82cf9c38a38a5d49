"""Randomized audit of the fixed-point count prediction and the E2 saddle claim.

Writes the structured report as JSON and prints a one-line summary per stratum.
"""

import argparse
import json
import time
from collections import Counter

from planktonmap.audit import run_audit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--per-stratum", type=int, default=80)
    ap.add_argument("--seed", type=int, default=20240101)
    ap.add_argument("--out", default="audit_report.json")
    args = ap.parse_args()

    t0 = time.perf_counter()
    rep = run_audit(per_stratum=args.per_stratum, seed=args.seed)
    elapsed = time.perf_counter() - t0

    bad = Counter(c.stratum for c in rep.mismatches)
    border = Counter(c.stratum for c in rep.cases if c.borderline)
    for stratum, n in rep.strata.items():
        print(f"{stratum:>12}  samples={n:4d}  borderline={border[stratum]:3d}  mismatches={bad[stratum]}")
    d = rep.as_dict()
    print(f"agreement {rep.agreement:.4f} over {len(rep.scored)} scored cases ({elapsed:.1f}s)")
    print(f"E2 found {d['conjecture']['e2_found']}, counterexamples {len(d['conjecture']['counterexamples'])}")
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(d, fh, indent=2)


if __name__ == "__main__":
    main()
