"""Certified poisoning size for unanimous votes at MNIST-scale parameters.

Usage: python scripts/mnist_scale.py [--n 60000 --k 100 --N 1000 --alpha 0.001 --e 10000 --c 10]
"""

import argparse
import time

from bagcert.bounds import bonferroni_alpha, simuem
from bagcert.certifier import (ATTACKS, CertInputs, certified_size, closed_form_delete, closed_form_insert,
                               closed_form_modify)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60000)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.001)
    ap.add_argument("--e", type=int, default=10000)
    ap.add_argument("--c", type=int, default=10)
    args = ap.parse_args()

    bounds = simuem([args.N] + [0] * (args.c - 1), args.N, args.c, bonferroni_alpha(args.alpha, args.e))
    print(f"p_lower={bounds.p_lower:.12f}  p_upper_runner={bounds.p_upper_runner:.3e}")
    for attack in ATTACKS:
        start = time.perf_counter()
        r = certified_size(CertInputs(args.n, args.k, bounds.p_lower, bounds.p_upper_runner, attack))
        print(f"r*({attack:7s}) = {r:6d}   [{1000 * (time.perf_counter() - start):.1f} ms]")
    inp = CertInputs(args.n, args.k, bounds.p_lower, bounds.p_upper_runner)
    print(f"closed forms: modify={closed_form_modify(inp)} delete={closed_form_delete(inp)} "
          f"insert={closed_form_insert(inp)}")


if __name__ == "__main__":
    main()
