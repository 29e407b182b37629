"""Effect of the confidence level alpha on certified accuracy.

Usage: python scripts/alpha_sweep.py [--alphas 0.1,0.01,0.001,0.0001] [--k 20]
"""

import argparse

from bagcert.certifier import accuracy_curve, certify_all
from bagcert.dataset import make_blobs
from bagcert.ensemble import train_votes
from bagcert.learners import BaseLearnerSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", default="0.1,0.01,0.001,0.0001")
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--r-max", type=int, default=30)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    alphas = [float(a) for a in args.alphas.split(",")]

    train = make_blobs(500, 4, spread=1.5, seed=1)
    test = make_blobs(200, 4, spread=1.5, seed=2)
    votes = train_votes(train, BaseLearnerSpec("centroid"), args.k, args.N, args.seed, test)
    truth = test.labels.tolist()
    curves = {a: accuracy_curve(certify_all(votes, a, ("general",)), truth, args.r_max) for a in alphas}
    print("r    " + " ".join(f"a={a:<8g}" for a in alphas))
    for r in range(0, args.r_max + 1, 5):
        print(f"{r:<4d} " + " ".join(f"{curves[a][r][1]:<10.3f}" for a in alphas))


if __name__ == "__main__":
    main()
