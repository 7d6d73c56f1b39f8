"""Exact martingale verification for the discrete-time constructions.

Enumerates every path prefix, classifies each process and reports the
largest one-step gap E[Y_{n+1} | prefix] - Y_n together with the means.
"""

import argparse
import math

import numpy as np

from pbn.chain import (
    EigenMG,
    FunctionProcess,
    IIDIncrements,
    MarkovChainModel,
    RandomWalk,
    make_martingale,
    solve_harmonic,
    verify_differences,
    verify_martingale_exact,
)


def build(horizon):
    two = MarkovChainModel(("a", "b"), [[0.9, 0.1], [0.2, 0.8]], [0.5, 0.5])
    ruin_P = np.zeros((5, 5))
    ruin_P[0, 0] = ruin_P[4, 4] = 1.0
    for i in (1, 2, 3):
        ruin_P[i, i - 1] = ruin_P[i, i + 1] = 0.5
    ruin = MarkovChainModel(tuple(range(5)), ruin_P, [0, 0, 1, 0, 0])
    fair = IIDIncrements([1.0, -1.0], [0.5, 0.5])
    drift = IIDIncrements([1.1, -0.9], [0.5, 0.5])
    return [
        ("eigen (0.7, (1,-2))", EigenMG(two, 0.7, [1, -2])),
        ("eigen, wrong lambda 0.65", EigenMG(two, 0.65, [1, -2], unchecked=True)),
        ("harmonic i/4, gambler's ruin", make_martingale("harmonic", ruin, phi=np.arange(5) / 4)),
        ("fair walk", RandomWalk(fair)),
        ("walk with drift 0.1", RandomWalk(drift, unchecked=True)),
        ("Wald, lambda = ln 2", make_martingale("wald", fair, lam=math.log(2))),
        ("Doob, terminal S_N", make_martingale("doob", fair, terminal="sum", horizon=horizon)),
        ("Doob, terminal max partial sum",
         make_martingale("doob", fair, terminal="max_partial_sum", horizon=horizon)),
        ("doubling stakes", make_martingale("transform", fair, rule="double_after_loss",
                                            stake=1.0, bound=2.0 ** horizon)),
        ("S_n^2", FunctionProcess(fair, lambda p: math.fsum(p[1:]) ** 2)),
        ("S_n^2 - n", FunctionProcess(fair, lambda p: math.fsum(p[1:]) ** 2 - (len(p) - 1))),
    ], ruin


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=6)
    args = ap.parse_args()

    procs, ruin = build(args.horizon)
    print("harmonic basis of the gambler's-ruin chain:")
    for v in solve_harmonic(ruin):
        print("  ", np.round(v, 12))
    print()
    print(f"{'process':<32} {'class':<16} {'min gap':>10} {'max gap':>10} {'mean drift':>11} {'diff ok':>8}")
    for name, proc in procs:
        rep = verify_martingale_exact(proc, args.horizon)
        diff = verify_differences(proc, args.horizon)
        print(f"{name:<32} {rep.classification:<16} {rep.min_gap:>10.2e} {rep.max_gap:>10.2e} "
              f"{rep.mean_residual:>11.2e} {str(diff.classification == rep.classification):>8}")


if __name__ == "__main__":
    main()
