"""Conditional-expectation identities on a corpus of random finite spaces.

Prints the worst residual per property and the total runtime.
"""

import argparse
import time
from collections import defaultdict

import numpy as np

from pbn.ce_properties import verify_ce_properties
from pbn.space import random_space


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spaces", type=int, default=200)
    ap.add_argument("--min-outcomes", type=int, default=4)
    ap.add_argument("--max-outcomes", type=int, default=12)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    worst = defaultdict(float)
    failures = 0
    t0 = time.perf_counter()
    for k in range(args.spaces):
        n = int(rng.integers(args.min_outcomes, args.max_outcomes + 1))
        for row in verify_ce_properties(random_space(rng, n), seed=k):
            # orthogonality rows are numbered per atom; pool them
            name = row.property.rsplit(" ", 1)[0] if row.property.startswith("orthogonality") else row.property
            worst[name] = max(worst[name], row.residual)
            failures += not row.passed
    elapsed = time.perf_counter() - t0

    width = max(map(len, worst))
    for name, res in sorted(worst.items(), key=lambda kv: -kv[1]):
        print(f"{name:<{width}}  {res:.2e}")
    print(f"\n{args.spaces} spaces, {failures} failing rows, {elapsed:.2f} s")


if __name__ == "__main__":
    main()
