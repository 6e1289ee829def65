"""Measure the early-stopping guarantee on random quadratic aggregates.

For every instance and oracle strategy, reports the worst gap relative to
tau, the largest iterate norm relative to R, descent violations and the
worst per-step drift excess. With ``--sampled`` also runs the sampled
protocol on a 200-client pool.
"""

import argparse
from collections import defaultdict

from advgrad.harness.experiments import guarantee_suite, sampled_protocol_trials, unit_quadratic_pool


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--sampled", action="store_true")
    ap.add_argument("--trials", type=int, default=20)
    args = ap.parse_args()

    worst = defaultdict(lambda: [0.0, 0.0, 0, float("-inf")])
    for c in guarantee_suite(args.instances):
        w = worst[(c.optimizer, c.strategy.value)]
        w[0] = max(w[0], c.check.gap / c.gap_bound if c.gap_bound > 0 else 0.0)
        w[1] = max(w[1], c.check.max_iterate_norm / c.R)
        w[2] += c.check.descent_violations
        w[3] = max(w[3], c.check.max_drift_excess)
    print(f"{'optimizer':>8} {'strategy':>16} {'gap/bound':>10} {'|w|/R':>7} {'desc.viol':>9} {'drift excess':>13}")
    for (opt, s), (g, nr, dv, dr) in sorted(worst.items()):
        print(f"{opt:>8} {s:>16} {g:10.4f} {nr:7.4f} {dv:9d} {dr:13.3e}")

    if args.sampled:
        f = unit_quadratic_pool(200, 5, 0)
        for eps, tau in ((30.0, 5.01 * 30.0), (0.01, 0.3)):
            trials = sampled_protocol_trials(f, eps, tau, 0.1, args.trials, policy="random-mix")
            ok = sum(t.gap <= t.tau for t in trials)
            print(f"sampled eps={eps:g} tau={tau:g}: m={trials[0].m} K={trials[0].K} "
                  f"success {ok}/{len(trials)}, worst gap {max(t.gap for t in trials):.4g}")


if __name__ == "__main__":
    main()
