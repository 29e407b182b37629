"""Certified size per attack model as the probability gap grows.

Usage: python scripts/attack_curves.py [--n 1000 --k 30] [--out curves.csv]
"""

import argparse
import csv
import sys

import numpy as np

from bagcert.certifier import ATTACKS, CertInputs, certified_size


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--k", type=int, default=30)
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["gap"] + [f"r_{a}" for a in ATTACKS])
    for gap in np.linspace(0.05, 1.0, args.points):
        row = [certified_size(CertInputs(args.n, args.k, float(gap), 0.0, a)) for a in ATTACKS]
        writer.writerow([f"{gap:.3f}"] + row)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
