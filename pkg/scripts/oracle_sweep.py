"""Loss per iteration of plain descent under each perturbation strategy.

Writes plot-ready rows (one per iteration) and prints the final loss per
(strategy, epsilon) together with the position of the loss minimum.

    python3 scripts/oracle_sweep.py --out sweep.csv
"""

import argparse

import numpy as np

from advgrad.harness.config import ExperimentConfig
from advgrad.harness.experiments import final_losses, is_v_shaped, loss_curve, run_oracle_sweep
from advgrad.harness.results import emit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--loss", default="bce")
    ap.add_argument("--eps0", type=float, default=0.01, help="sweep eps in {0, eps0, 4 eps0, 16 eps0}")
    ap.add_argument("--K", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="oracle_sweep.csv")
    args = ap.parse_args()

    cfg = ExperimentConfig.from_mapping(dict(
        experiment="oracle-sweep", n=args.n, d=args.d, loss=args.loss, K=[args.K], seeds=[args.seed],
        epsilons=[0.0, args.eps0, 4 * args.eps0, 16 * args.eps0], workers=args.workers,
    ))
    rows = run_oracle_sweep(cfg)
    emit(rows, args.out)

    for s in cfg.strategies:
        print(f"{s.value:>16}", end="")
        for eps, loss in final_losses(rows, s.value).items():
            curve = loss_curve(rows, s.value, eps)
            mark = "V" if is_v_shaped(curve) else " "
            print(f"  eps={eps:<6g} final={loss:.5f} argmin={int(np.argmin(curve)):>5}{mark}", end="")
        print()
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
