"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure
during a run, 3 a checked property did not hold.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from ..distributed import Budget, ClientPool, Mode, SampledOracleConfig, run_dlagp
from ..optimizer import OptimizerConfig, agp_opt, plain_gd
from ..oracle import OracleStrategy, make_oracle
from . import experiments as ex
from .config import ConfigError, ExperimentConfig, read_config_file
from .libsvm import PRESETS, LibsvmFormatError, parse_label_map, parse_libsvm, preprocess, write_libsvm
from .results import ResultRow, emit, to_csv, to_json

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_PROPERTY = 0, 1, 2, 3

log = logging.getLogger("advgrad")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag name -> config key
_OVERRIDES = {
    "epsilon": "epsilons",
    "strategy": "strategies",
    "seed": "seeds",
    "tau": "tau",
    "R": "R",
    "L": "L",
    "K": "K",
    "Q": "Q",
    "loss": "loss",
    "out": "out",
    "format": "format",
    "data": "data",
    "preset": "preset",
    "n": "n",
    "d": "d",
    "data_seed": "data_seed",
    "delta": "delta",
    "t": "t",
    "B": "B",
    "trials": "trials",
    "workers": "workers",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--seed", help="seed, or comma separated seeds for sweeps")
    p.add_argument("--out", help="result file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--epsilon", help="perturbation bound(s), comma separated")
    p.add_argument("--tau", help="target gap(s)")
    p.add_argument("--R", help="norm bound(s) on the minimizer")
    p.add_argument("--L", help="smoothness value(s) for the 1-D lower-bound instances")
    p.add_argument("--K", help="iteration budget(s)")
    p.add_argument("--Q", help="total query budget(s)")
    p.add_argument("--strategy", help="oracle strategy or strategies")
    p.add_argument("--loss", choices=("quadratic", "rr", "bce"))
    p.add_argument("--data", help="'synthetic' or a LIBSVM file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="preprocessing for --data files")
    p.add_argument("--n", type=int, help="synthetic sample count")
    p.add_argument("--d", type=int, help="synthetic dimension including the bias")
    p.add_argument("--data-seed", type=int, dest="data_seed")
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="advgrad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", help="one optimizer run against a perturbing oracle")
    _add_common(p)
    p.add_argument("--plain", action="store_true", help="disable the early stop")

    p = sub.add_parser("simulate", help="one run through the client pool")
    _add_common(p)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="full")
    p.add_argument("--delta", type=float)

    for name, helptext in (
        ("oracle-sweep", "loss per iteration for every strategy and epsilon"),
        ("budget-sweep", "final loss for every split of a query budget"),
        ("lower-bound", "check the two lower-bound constructions"),
        ("center-est", "empirical failure rate of sampled mean estimation"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "center-est":
            p.add_argument("--delta", type=float)
            p.add_argument("--t", type=float)
            p.add_argument("--B", type=float)
            p.add_argument("--trials", type=int)

    p = sub.add_parser("ingest", help="parse a LIBSVM file, preprocess it, write it back")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--label-map", help='e.g. "-1:0,1:1"')
    p.add_argument("--drop", default="", help="1-based feature indices to drop, comma separated")
    p.add_argument("--n-features", type=int, help="raw dimension when trailing features are absent")
    return parser


def resolve_config(args, experiment: str) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        values.update(read_config_file(args.config))
    values["experiment"] = experiment
    for flag, key in _OVERRIDES.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return ExperimentConfig.from_mapping(values)


def _write_rows(rows, cfg: ExperimentConfig) -> None:
    if cfg.out:
        emit(rows, cfg.out, cfg.format)
    else:
        sys.stdout.write(to_csv(rows) if cfg.format == "csv" else to_json(rows))


def _objective(cfg):
    f = ex.build_objective(ex.load_dataset(cfg), cfg.loss)
    w_star = f.minimizer() if f.kind.value == "quadratic" else None
    return f, w_star


def cmd_optimize(args, cfg: ExperimentConfig) -> int:
    f, w_star = _objective(cfg)
    eps, seed = cfg.epsilons[0], cfg.seeds[0]
    R = float(np.linalg.norm(w_star)) if w_star is not None and args.R is None else cfg.R[0]
    opt = OptimizerConfig(L=f.smoothness, epsilon=eps, R=R, tau=cfg.tau[0],
                          K_override=cfg.K[0] if args.K is not None else None)
    oracle = make_oracle(f.grad, OracleStrategy(cfg.strategies[0], eps), seed)
    run = (plain_gd if args.plain else agp_opt)(f, oracle, opt)
    f_star = None if w_star is None else f.eval(w_star)
    rows = [
        ResultRow("optimize", seed, cfg.strategies[0].value, eps, k=k, K=opt.K, loss=float(v),
                  gap=None if f_star is None else float(v - f_star), queries=k)
        for k, v in enumerate(run.losses)
    ]
    _write_rows(rows, cfg)
    log.info("terminated by %s after %d oracle calls", run.terminated_by.value, run.queries_used)
    return EXIT_OK


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    f, w_star = _objective(cfg)
    eps, seed = cfg.epsilons[0], cfg.seeds[0]
    R = float(np.linalg.norm(w_star)) if w_star is not None and args.R is None else cfg.R[0]
    pool = ClientPool(f, cfg.strategies[0], eps, seed=seed)
    mode = Mode(args.mode)
    opt = OptimizerConfig(L=f.smoothness, epsilon=eps, R=R, tau=cfg.tau[0],
                          K_override=cfg.K[0] if args.K is not None and mode is Mode.FULL else None)
    sampled = SampledOracleConfig(tau=cfg.tau[0], R=R, delta=cfg.delta) if mode is Mode.SAMPLED else None
    budget = Budget(cfg.Q[0], cfg.K[0]) if mode is Mode.BUDGET else None
    run = run_dlagp(pool, opt, mode, sampled=sampled, budget=budget, record="stream")
    summary = {
        "mode": mode.value, "strategy": cfg.strategies[0].value, "epsilon": eps, "seed": seed,
        "iterations": len(run.reply_norms), "terminated_by": run.terminated_by.value,
        "queries": run.queries_used, "final_loss": float(run.losses[-1]),
        "gap": None if w_star is None else float(run.losses[-1] - f.eval(w_star)),
    }
    summary.update({k: v for k, v in run.extra.items() if k != "mode"})
    text = json.dumps(summary, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle_sweep(args, cfg: ExperimentConfig) -> int:
    rows = ex.run_oracle_sweep(cfg)
    _write_rows(rows, cfg)
    top = max(cfg.epsilons)
    for s in cfg.strategies:
        curve = ex.loss_curve(rows, s.value, top)
        log.warning("qualitative: %s at eps=%g, argmin k=%d of %d, v-shape=%s",
                    s.value, top, int(np.argmin(curve)), len(curve) - 1, ex.is_v_shaped(curve))
    return EXIT_OK


def cmd_budget_sweep(args, cfg: ExperimentConfig) -> int:
    rows = ex.run_budget_sweep(cfg)
    _write_rows(rows, cfg)
    for K in cfg.K:
        widths = {}
        for Q in cfg.Q:
            try:
                widths[Q // K] = ex.band_width(rows, max(cfg.epsilons), Q, K)
            except KeyError:
                continue
        if len(widths) >= 2:
            lo, hi = min(widths), max(widths)
            ratio = widths[hi] / widths[lo] if widths[lo] > 0 else float("nan")
            log.warning("qualitative: K=%d seed spread at m=%d over m=%d is %.3g", K, hi, lo, ratio)
    return EXIT_OK


def cmd_lower_bound(args, cfg: ExperimentConfig) -> int:
    report = ex.run_lower_bound(cfg)
    _write_rows(report.rows(), cfg)
    if not report.ok:
        log.error("lower-bound check failed")
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_center_est(args, cfg: ExperimentConfig) -> int:
    result = ex.run_center_est(cfg)
    text = json.dumps(result, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if result["within_delta"] else EXIT_PROPERTY


def cmd_ingest(args) -> int:
    if args.preset:
        prep = PRESETS[args.preset]
        label_map, drop, raw_d = prep.label_map, prep.drop_dims, prep.raw_d
    elif args.label_map:
        label_map = parse_label_map(args.label_map)
        drop = tuple(int(x) for x in args.drop.split(",") if x.strip())
        raw_d = args.n_features
    else:
        raise ConfigError("ingest needs --preset or --label-map")
    raw = parse_libsvm(args.input, n_features=args.n_features or raw_d)
    ds = preprocess(raw, label_map, drop)
    write_libsvm(args.output, ds.X, ds.y)
    log.warning("ingested %d points, d %d -> %d", ds.n, raw.d, ds.d)
    return EXIT_OK


_COMMANDS = {
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "oracle-sweep": cmd_oracle_sweep,
    "budget-sweep": cmd_budget_sweep,
    "lower-bound": cmd_lower_bound,
    "center-est": cmd_center_est,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "ingest":
            return cmd_ingest(args)
        experiment = args.command if args.command in ("oracle-sweep", "budget-sweep", "lower-bound",
                                                      "center-est") else "oracle-sweep"
        cfg = resolve_config(args, experiment)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, LibsvmFormatError) as exc:
        print(f"advgrad: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FloatingPointError as exc:
        print(f"advgrad: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"advgrad: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as exc:
        print(f"advgrad: property violated: {exc}", file=sys.stderr)
        return EXIT_PROPERTY


if __name__ == "__main__":
    sys.exit(main())
