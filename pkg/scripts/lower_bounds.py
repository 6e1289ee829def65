"""Check the two one-dimensional lower-bound constructions and print a table."""

import argparse
import sys

from advgrad.harness.config import ExperimentConfig
from advgrad.harness.experiments import run_lower_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilons", default="0.1,0.5,1")
    ap.add_argument("--R", default="1,2")
    ap.add_argument("--L", default="1,4")
    ap.add_argument("--tau", default="0.5,1,2")
    ap.add_argument("--K", type=int, default=100)
    args = ap.parse_args()

    cfg = ExperimentConfig.from_mapping(dict(
        experiment="lower-bound", epsilons=args.epsilons, R=args.R, L=args.L, tau=args.tau, K=[args.K],
    ))
    report = run_lower_bound(cfg)
    print("zero reply: the adversary picks whichever mirror image the output is worse on")
    for c in report.indistinguishable:
        print(f"  {c.optimizer:>7} R={c.R:g} L={c.L:g} eps={c.epsilon:<4g} w_out={c.w_out:+.4f} "
              f"gaps=({c.gap_f1:.4f}, {c.gap_f2:.4f}) need>={c.bound:.4f} {'ok' if c.ok else 'FAIL'}")
    print("constant reply 3 tau: hidden ramp placed after the run")
    for c in report.certification:
        print(f"  tau={c.tau:g} L={c.L:g} queries={len(c.queries)} R={c.R:.3f} "
              f"gap={c.certified_gap:.4f} need>={3 * c.tau:g} {'ok' if c.ok else 'FAIL'}")
    sys.exit(0 if report.ok else 3)


if __name__ == "__main__":
    main()
