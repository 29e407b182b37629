"""How the subsample size k trades clean accuracy against certified size.

Prints r*(modify) over k for fixed gaps, then certified-accuracy curves of
centroid-learner ensembles on a synthetic four-class dataset.

Usage: python scripts/k_tradeoff.py [--ks 5,10,20,30] [--r-max 40]
"""

import argparse

from bagcert.certifier import CertInputs, accuracy_curve, certified_size, certify_all
from bagcert.dataset import make_blobs
from bagcert.ensemble import train_votes
from bagcert.learners import BaseLearnerSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--ks", default="5,10,20,30")
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.001)
    ap.add_argument("--r-max", type=int, default=40)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    ks = [int(v) for v in args.ks.split(",")]

    print("r*(modify) for n =", args.n)
    print("gap   " + " ".join(f"k={k:<5d}" for k in (5, 10, 30, 100, 500)))
    for gap in (0.2, 0.5, 0.8, 1.0):
        radii = [certified_size(CertInputs(args.n, k, gap, 0.0, "modify")) for k in (5, 10, 30, 100, 500)]
        print(f"{gap:<5} " + " ".join(f"{r:<7d}" for r in radii))

    train = make_blobs(500, 4, spread=1.5, seed=1)
    test = make_blobs(200, 4, spread=1.5, seed=2)
    truth = test.labels.tolist()
    print("\ncertified accuracy, centroid learner, general attack")
    print("r    " + " ".join(f"k={k:<5d}" for k in ks))
    curves = {}
    for k in ks:
        votes = train_votes(train, BaseLearnerSpec("centroid"), k, args.N, args.seed, test)
        curves[k] = accuracy_curve(certify_all(votes, args.alpha, ("general",)), truth, args.r_max)
    for r in range(0, args.r_max + 1, 5):
        print(f"{r:<4d} " + " ".join(f"{curves[k][r][1]:<7.3f}" for k in ks))


if __name__ == "__main__":
    main()
