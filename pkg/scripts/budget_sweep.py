"""Final loss for each split of a fixed query budget into K iterations of m = Q // K samples.

Clients perturb with a uniformly random choice among the three strategies.
Besides the per-seed rows the output holds min/max bands across seeds and
the exact all-clients reference for every K.

    python3 scripts/budget_sweep.py --Q 10000,100000 --seeds 0,1,2,3,4
"""

import argparse

from advgrad.harness.config import ExperimentConfig
from advgrad.harness.experiments import band_width, run_budget_sweep
from advgrad.harness.results import emit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--loss", default="bce")
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--K", default="10,30,100,300,1000")
    ap.add_argument("--Q", default="10000")
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="budget_sweep.csv")
    args = ap.parse_args()

    cfg = ExperimentConfig.from_mapping(dict(
        experiment="budget-sweep", n=args.n, d=args.d, loss=args.loss, epsilons=[args.epsilon],
        K=args.K, Q=args.Q, seeds=args.seeds, workers=args.workers,
    ))
    rows = run_budget_sweep(cfg)
    emit(rows, args.out)

    for Q in cfg.Q:
        for K in cfg.K:
            if Q < K:
                continue
            finals = [r.loss for r in rows if r.strategy == "random-mix" and (r.Q, r.K) == (Q, K)]
            ref = next(r.loss for r in rows if r.strategy == "reference" and r.K == K)
            width = band_width(rows, args.epsilon, Q, K)
            print(f"Q={Q:<7} K={K:<5} m={Q // K:<6} mean={sum(finals) / len(finals):.5f} "
                  f"band={width:.2e} reference={ref:.5f}")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
