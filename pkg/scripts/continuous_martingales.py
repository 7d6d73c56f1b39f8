"""Monte Carlo checks for Poisson and Brownian martingales.

Samples each process on a uniform grid, prints moments against their
closed forms and the binned martingale statistic for raw and compensated
versions.
"""

import argparse
import time

from pbn import sim


def report(label, rep):
    worst = max(abs(b.sigmas) for b in rep.bins)
    print(f"  {label:<24} pass={str(rep.passed):<5} drift={rep.drift:+.4f} "
          f"(se {rep.drift_stderr:.4f})  worst bin {worst:.2f} sigma over {len(rep.bins)} bins")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--lam", type=float, default=2.0)
    ap.add_argument("--mu", type=float, default=0.5)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--s", type=float, default=0.5)
    ap.add_argument("--t", type=float, default=1.0)
    args = ap.parse_args()
    grid = sim.TimeGrid.uniform(args.t, 10)

    t0 = time.perf_counter()
    pois = sim.sample_poisson(args.lam, grid, args.paths, args.seed, args.workers)
    m = sim.moment_summary(pois, args.t)
    print(f"Poisson lam={args.lam}: {time.perf_counter() - t0:.2f} s")
    print(f"  mean {m['mean']:.4f} +- {m['mean_stderr']:.4f} (expect {args.lam * args.t})")
    print(f"  var  {m['var']:.4f} +- {m['var_stderr']:.4f} (expect {args.lam * args.t})")
    report("N_t", sim.verify_martingale_statistical(pois, args.s, args.t))
    report("N_t - lam t", sim.verify_martingale_statistical(sim.compensate(pois), args.s, args.t))
    inc = sim.independent_increments_check(pois, args.s, args.t)
    print(f"  increments: corr {inc.correlation:+.4f}, homogeneous={inc.homogeneous}")

    bm = sim.sample_brownian(args.mu, args.sigma, grid, args.paths, args.seed, args.workers)
    z = sim.compensate(bm)
    mq = sim.quadratic_martingale(z)
    print(f"\nBrownian mu={args.mu} sigma={args.sigma}:")
    mz = sim.moment_summary(z, args.t)
    print(f"  <Z_t^2> {mz['var'] + mz['mean'] ** 2:.4f} (expect {args.sigma ** 2 * args.t})")
    report("X_t", sim.verify_martingale_statistical(bm, args.s, args.t))
    report("Z_t = X_t - mu t", sim.verify_martingale_statistical(z, args.s, args.t))
    report("M_t = Z_t^2 - sigma^2 t", sim.verify_martingale_statistical(mq, args.s, args.t))

    print("\nparameter dimensions:")
    for ens in (pois, bm):
        for c in sim.check_parameter_dims(ens):
            print(f"  {c.lhs} == {c.rhs}: {c.message}")


if __name__ == "__main__":
    main()
