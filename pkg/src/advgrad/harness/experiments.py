"""Experiment drivers: oracle sweeps, budget allocation, lower-bound checks.

Sweep points are independent and may run in worker processes; rows are
sorted before they are written, so output does not depend on scheduling.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ..distributed import Budget, ClientPool, Mode, SampledOracleConfig, full_oracle, run_dlagp
from ..estimation import PointSet, failure_rate, required_m
from ..losses import AggregateLoss, Dataset, LossKind, Quadratic, quadratic_aggregate, synth_dataset
from ..optimizer import (
    OptimizerConfig,
    OptimizerRun,
    agp_opt,
    gd_gap_bound,
    finite_budget_gap_bound,
    plain_gd,
)
from ..oracle import (
    HardInstance1D,
    HardKind,
    OracleStrategy,
    Strategy,
    hard_eval,
    hard_grad,
    make_oracle,
    thm31_adversary_finalize,
)
from .config import ExperimentConfig
from .libsvm import PRESETS, parse_libsvm, preprocess
from .results import ResultRow, sort_rows

log = logging.getLogger(__name__)


def _map(fn: Callable, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data == "synthetic":
        return synth_dataset(cfg.n, cfg.d, cfg.data_seed, separable=cfg.separable, flip_prob=cfg.flip_prob)
    if cfg.preset is None:
        raise ValueError("file datasets need a preset naming the label map and dropped features")
    prep = PRESETS[cfg.preset]
    raw = parse_libsvm(cfg.data, n_features=prep.raw_d)
    return preprocess(raw, prep.label_map, prep.drop_dims)


def build_objective(ds: Dataset, loss: LossKind) -> AggregateLoss:
    """Aggregate of one loss per point; ``quadratic`` centers a unit quadratic on each ``x``."""
    loss = LossKind(loss)
    if loss is LossKind.QUADRATIC:
        return AggregateLoss([Quadratic(x, 1.0) for x in ds.X])
    return AggregateLoss.from_dataset(ds, loss)


def _known_optimum(f: AggregateLoss) -> float | None:
    if f.kind is LossKind.QUADRATIC:
        return f.eval(f.minimizer())
    return None


# --- oracle sweep ----------------------------------------------------------


def _oracle_sweep_point(task) -> list[ResultRow]:
    cfg, strategy, eps, K, seed = task
    f = build_objective(load_dataset(cfg), cfg.loss)
    f_star = _known_optimum(f)
    oracle = make_oracle(f.grad, OracleStrategy(strategy, eps), seed)
    opt = OptimizerConfig(L=f.smoothness, epsilon=eps, R=1.0, tau=1.0, K_override=K, early_stop=False)
    run = plain_gd(f, oracle, opt)
    return [
        ResultRow(
            experiment="oracle-sweep",
            seed=seed,
            strategy=Strategy(strategy).value,
            epsilon=eps,
            k=k,
            K=K,
            loss=float(loss),
            gap=None if f_star is None else float(loss - f_star),
            queries=k,
        )
        for k, loss in enumerate(run.losses)
    ]


def run_oracle_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """Per-iteration losses of plain descent for every (strategy, eps, K, seed).

    The perturbation acts on the aggregate gradient; ``queries`` counts
    oracle calls.
    """
    tasks = [(cfg, s, e, K, seed) for s in cfg.strategies for e in cfg.epsilons for K in cfg.K for seed in cfg.seeds]
    rows = [r for chunk in _map(_oracle_sweep_point, tasks, cfg.workers) for r in chunk]
    return sort_rows(rows)


def final_losses(rows: Iterable[ResultRow], strategy: str) -> dict[float, float]:
    """Last-iteration loss per epsilon for one strategy (first seed, first K)."""
    last: dict[float, ResultRow] = {}
    for r in rows:
        if r.strategy != strategy:
            continue
        cur = last.get(r.epsilon)
        if cur is None or (r.seed, r.K, -r.k) < (cur.seed, cur.K, -cur.k):
            last[r.epsilon] = r
    return {e: r.loss for e, r in sorted(last.items())}


def loss_curve(rows: Iterable[ResultRow], strategy: str, epsilon: float, seed: int | None = None) -> np.ndarray:
    sel = [r for r in rows if r.strategy == strategy and r.epsilon == epsilon and (seed is None or r.seed == seed)]
    if seed is None and sel:
        first = min(r.seed for r in sel)
        sel = [r for r in sel if r.seed == first]
    return np.array([r.loss for r in sorted(sel, key=lambda r: r.k)])


def is_v_shaped(losses: np.ndarray) -> bool:
    """Loss minimum strictly inside the run, with a real rise after it."""
    k = int(np.argmin(losses))
    return bool(0 < k < len(losses) - 1 and losses[-1] > losses[k])


# --- budget sweep ----------------------------------------------------------


def _budget_point(task) -> ResultRow:
    cfg, eps, Q, K, seed = task
    f = build_objective(load_dataset(cfg), cfg.loss)
    f_star = _known_optimum(f)
    if Q < K:
        log.warning("skipping Q=%d < K=%d", Q, K)
        return ResultRow("budget-sweep", seed, "skipped:Q<K", eps, k=None, K=K, Q=Q, queries=0)
    pool = ClientPool(f, Strategy.RANDOM_MIX, eps, seed=seed)
    opt = OptimizerConfig(L=f.smoothness, epsilon=eps, R=1.0, tau=1.0, early_stop=False)
    run = run_dlagp(pool, opt, Mode.BUDGET, budget=Budget(Q, K), record="stream")
    loss = float(run.losses[-1])
    return ResultRow(
        "budget-sweep", seed, Strategy.RANDOM_MIX.value, eps, k=K, K=K, Q=Q, loss=loss,
        gap=None if f_star is None else loss - f_star, queries=run.queries_used,
    )


def _reference_point(task) -> ResultRow:
    cfg, K = task
    f = build_objective(load_dataset(cfg), cfg.loss)
    f_star = _known_optimum(f)
    pool = ClientPool(f, Strategy.EXACT, 0.0)
    opt = OptimizerConfig(L=f.smoothness, epsilon=0.0, R=1.0, tau=1.0, K_override=K, early_stop=False)
    run = plain_gd(f, lambda w: full_oracle(pool, w), opt, record="stream")
    loss = float(run.losses[-1])
    return ResultRow(
        "budget-sweep", None, "reference", 0.0, k=K, K=K, Q=f.n * K, loss=loss,
        gap=None if f_star is None else loss - f_star, queries=pool.query_count,
    )


def run_budget_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """Final loss for each (eps, Q, K, seed) under random-mix clients.

    Also emits the all-clients exact reference (``Q = n K``, eps = 0) per K,
    and ``band-min``/``band-max`` rows spanning the seeds of each (eps, Q, K).
    """
    tasks = [(cfg, e, Q, K, s) for e in cfg.epsilons for Q in cfg.Q for K in cfg.K for s in cfg.seeds]
    rows = _map(_budget_point, tasks, cfg.workers)
    rows += _map(_reference_point, [(cfg, K) for K in cfg.K], cfg.workers)
    rows += budget_bands(rows)
    return sort_rows(rows)


def budget_bands(rows: Iterable[ResultRow]) -> list[ResultRow]:
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        if r.strategy == Strategy.RANDOM_MIX.value and r.loss is not None:
            groups.setdefault((r.epsilon, r.Q, r.K), []).append(r)
    out = []
    for (eps, Q, K), grp in groups.items():
        losses = [r.loss for r in grp]
        for tag, val in (("band-min", min(losses)), ("band-max", max(losses))):
            out.append(ResultRow("budget-sweep", None, tag, eps, k=K, K=K, Q=Q, loss=val, queries=grp[0].queries))
    return out


def band_width(rows: Iterable[ResultRow], eps: float, Q: int, K: int) -> float:
    lo = hi = None
    for r in rows:
        if (r.epsilon, r.Q, r.K) == (eps, Q, K):
            if r.strategy == "band-min":
                lo = r.loss
            elif r.strategy == "band-max":
                hi = r.loss
    if lo is None or hi is None:
        raise KeyError((eps, Q, K))
    return hi - lo


# --- theory checks on quadratics -------------------------------------------


def random_quadratic_instance(n: int, d: int, seed: int) -> AggregateLoss:
    """Quadratic clients with scales in [0.5, 2] and centers clustered around a random point."""
    rng = np.random.default_rng(seed)
    mean = rng.normal(size=d)
    centers = mean + 0.5 * rng.normal(size=(n, d))
    scales = rng.uniform(0.5, 2.0, size=n)
    return quadratic_aggregate(centers, scales)


@dataclass
class RunCheck:
    """Properties of one run measured against a known minimizer."""

    gap: float
    max_iterate_norm: float
    descent_violations: int
    max_drift_excess: float
    K: int
    K_prime: int


def check_run(run: OptimizerRun, f, w_star: np.ndarray, cfg: OptimizerConfig) -> RunCheck:
    f_star = f.eval(w_star)
    gap = float(run.losses[-1] - f_star)
    norms = np.linalg.norm(run.iterates, axis=1)
    steps = len(run.iterates) - 1
    big = run.reply_norms[:steps] >= 4.0 * cfg.epsilon
    violations = int(np.sum(big & ~(run.losses[1:] < run.losses[:-1])))
    dist = np.linalg.norm(run.iterates - w_star, axis=1)
    drift = np.diff(dist) - cfg.epsilon / (2.0 * cfg.L)
    return RunCheck(
        gap=gap,
        max_iterate_norm=float(norms.max()),
        descent_violations=violations,
        max_drift_excess=float(drift.max()) if len(drift) else -np.inf,
        K=cfg.K,
        K_prime=run.K_prime,
    )


GUARANTEE_STRATEGIES = (
    Strategy.EXACT,
    Strategy.OPPOSING,
    Strategy.AMPLIFYING,
    Strategy.FIXED_DIRECTION,
    Strategy.RANDOM_MIX,
)
GUARANTEE_GRID = [(n, d, e) for n in (1, 10, 100) for d in (2, 10) for e in (0.001, 0.01, 0.1)]


@dataclass
class GuaranteeCase:
    seed: int
    n: int
    d: int
    epsilon: float
    R: float
    tau: float
    strategy: Strategy
    optimizer: str
    check: RunCheck
    gap_bound: float
    queries: int


def guarantee_suite(
    instances: int = 50,
    strategies: Sequence[Strategy] = GUARANTEE_STRATEGIES,
    optimizers: Sequence[str] = ("agp-opt", "gd"),
) -> list[GuaranteeCase]:
    """Run both optimizers on seeded quadratic aggregates with tau = 5 eps R.

    Instance ``s`` uses grid point ``s mod 18`` of (n, d, eps) and R = ||w*||.
    The oracle perturbs the aggregate gradient with each strategy in turn.
    """
    cases = []
    for seed in range(instances):
        n, d, eps = GUARANTEE_GRID[seed % len(GUARANTEE_GRID)]
        f = random_quadratic_instance(n, d, seed)
        w_star = f.minimizer()
        R = float(np.linalg.norm(w_star))
        cfg = OptimizerConfig(L=f.smoothness, epsilon=eps, R=R, tau=5.0 * eps * R)
        for strategy in strategies:
            for name in optimizers:
                oracle = make_oracle(f.grad, OracleStrategy(strategy, eps), seed)
                algo = agp_opt if name == "agp-opt" else plain_gd
                run = algo(f, oracle, cfg, true_grad=f.grad)
                bound = cfg.tau if name == "agp-opt" else gd_gap_bound(eps, R, R)
                cases.append(
                    GuaranteeCase(seed, n, d, eps, R, cfg.tau, strategy, name, check_run(run, f, w_star, cfg), bound,
                                  run.queries_used)
                )
    return cases


def guarantee_rows(cases: Iterable[GuaranteeCase]) -> list[ResultRow]:
    return sort_rows(
        ResultRow(
            experiment=f"guarantee-{c.optimizer}", seed=c.seed, strategy=c.strategy.value, epsilon=c.epsilon,
            k=c.check.K_prime, K=c.check.K, loss=None, gap=c.check.gap, queries=c.queries,
        )
        for c in cases
    )


def finite_budget_bound_for(f: AggregateLoss, eps: float, K: int) -> float:
    return finite_budget_gap_bound(f.smoothness, eps, float(np.linalg.norm(f.minimizer())), K)


# --- randomized protocol ---------------------------------------------------


@dataclass
class SampledTrial:
    seed: int
    gap: float
    tau: float
    m: int
    K: int
    queries: int


def sampled_protocol_trials(
    f: AggregateLoss,
    epsilon: float,
    tau: float,
    delta: float,
    trials: int,
    policy: Strategy | str = Strategy.EXACT,
    R: float | None = None,
    first_seed: int = 0,
) -> list[SampledTrial]:
    """Seeded runs of sampled mode on a quadratic pool; gap is measured exactly."""
    w_star = f.minimizer()
    R = float(np.linalg.norm(w_star)) if R is None else R
    f_star = f.eval(w_star)
    out = []
    for seed in range(first_seed, first_seed + trials):
        pool = ClientPool(f, policy, epsilon, seed=seed)
        cfg = OptimizerConfig(L=f.smoothness, epsilon=epsilon, R=R, tau=tau)
        run = run_dlagp(pool, cfg, Mode.SAMPLED, sampled=SampledOracleConfig(tau=tau, R=R, delta=delta))
        out.append(SampledTrial(seed, float(run.losses[-1] - f_star), tau, run.extra["m"], run.extra["K"],
                                run.queries_used))
    return out


def sampled_rows(trials: Iterable[SampledTrial], epsilon: float, policy: str) -> list[ResultRow]:
    return sort_rows(
        ResultRow("sampled-protocol", t.seed, policy, epsilon, K=t.K, Q=t.m * t.K, gap=t.gap, queries=t.queries)
        for t in trials
    )


# --- lower bounds ----------------------------------------------------------


@dataclass
class IndistinguishableCase:
    R: float
    L: float
    epsilon: float
    optimizer: str
    w_out: float
    gap_f1: float
    gap_f2: float
    bound: float

    @property
    def ok(self) -> bool:
        return max(self.gap_f1, self.gap_f2) >= self.bound - 1e-12


@dataclass
class CertificationCase:
    tau: float
    L: float
    queries: list[float]
    w_out: float
    R: float
    slopes_exact: bool
    certified_gap: float

    @property
    def ok(self) -> bool:
        return self.slopes_exact and self.certified_gap >= 3.0 * self.tau


@dataclass
class LowerBoundReport:
    indistinguishable: list[IndistinguishableCase] = field(default_factory=list)
    certification: list[CertificationCase] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.indistinguishable) and all(c.ok for c in self.certification)

    def rows(self) -> list[ResultRow]:
        """``loss`` holds the achieved gap and ``gap`` the bound it must reach."""
        rows = [
            ResultRow("lower-bound-zero-reply", None, f"{c.optimizer}:R={c.R:g}:L={c.L:g}", c.epsilon,
                      loss=max(c.gap_f1, c.gap_f2), gap=c.bound)
            for c in self.indistinguishable
        ]
        rows += [
            ResultRow("lower-bound-constant-reply", None, f"constant-3tau:tau={c.tau:g}:L={c.L:g}", 0.0,
                      K=len(c.queries), loss=c.certified_gap, gap=3.0 * c.tau, queries=len(c.queries))
            for c in self.certification
        ]
        return sort_rows(rows)


def zero_reply_case(R: float, L: float, eps: float, optimizer: str = "agp-opt", K: int = 100,
                    w0: float = 0.0) -> IndistinguishableCase:
    """Run against an oracle that always answers 0, then let the adversary pick f1 or f2."""
    f1 = HardInstance1D(R, L, eps, HardKind.F1)
    f2 = HardInstance1D(R, L, eps, HardKind.F2)

    def oracle(w):
        # zero is within eps of both derivatives everywhere
        assert abs(hard_grad(f1, float(w[0]))) <= eps and abs(hard_grad(f2, float(w[0]))) <= eps
        return np.zeros(1)

    cfg = OptimizerConfig(L=L, epsilon=eps, R=R, tau=eps * R / 4.0, K_override=K, w0=np.array([w0]))
    algo = agp_opt if optimizer == "agp-opt" else plain_gd
    run = algo(f1, oracle, cfg)
    w_out = float(run.w_out[0])
    return IndistinguishableCase(R, L, eps, optimizer, w_out, hard_eval(f1, w_out), hard_eval(f2, w_out),
                                 eps * R / 2.0)


def constant_reply_case(tau: float, L: float, K: int, w0: float = 0.0) -> CertificationCase:
    """Run against the constant reply ``3 tau`` and finalize the hidden instance afterwards."""
    slope = 3.0 * tau
    cfg = OptimizerConfig(L=L, epsilon=0.0, R=1.0, tau=tau, K_override=K, w0=np.array([w0]))
    run = agp_opt(None, lambda w: np.array([slope]), cfg)
    queried = [float(w[0]) for w in run.iterates[: len(run.reply_norms)]]
    w_out = float(run.w_out[0])
    inst = thm31_adversary_finalize(queried, w_out, tau, L)
    exact = all(hard_grad(inst, q) == slope for q in queried)
    return CertificationCase(tau, L, queried, w_out, inst.R, exact, hard_eval(inst, w_out) - 0.0)


def run_lower_bound(cfg: ExperimentConfig) -> LowerBoundReport:
    report = LowerBoundReport()
    K = cfg.K[0]
    for R in cfg.R:
        for L in cfg.L:
            for eps in cfg.epsilons:
                if eps <= 0:
                    continue
                for name in ("agp-opt", "gd"):
                    report.indistinguishable.append(zero_reply_case(R, L, eps, name, K))
    for tau in cfg.tau:
        for L in cfg.L:
            report.certification.append(constant_reply_case(tau, L, K))
    return report


# --- center estimation -----------------------------------------------------


def random_point_set(n: int, d: int, B: float, seed: int) -> PointSet:
    """Points with norm at most ``B``, direction uniform, radius uniform in [0, B]."""
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(n, d))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    P *= B * rng.uniform(0.0, 1.0, size=(n, 1))
    return PointSet(P, B)


def run_center_est(cfg: ExperimentConfig) -> dict:
    seed = cfg.seeds[0]
    ps = random_point_set(cfg.n, cfg.d, cfg.B, seed)
    m = required_m(cfg.B, cfg.t, cfg.delta)
    rate = failure_rate(ps, m, cfg.t, cfg.trials, seed + 1)
    return {
        "n": cfg.n, "d": cfg.d, "B": cfg.B, "t": cfg.t, "delta": cfg.delta, "m": m, "trials": cfg.trials,
        "seed": seed, "failure_rate": rate, "within_delta": rate <= cfg.delta,
    }


def unit_quadratic_pool(n: int, d: int, seed: int, R: float = 1.0, spread: float = 0.3) -> AggregateLoss:
    """Unit-scale quadratic clients whose centers average to a point of norm exactly ``R``."""
    rng = np.random.default_rng(seed)
    u = rng.normal(size=d)
    u *= R / np.linalg.norm(u)
    noise = spread * rng.normal(size=(n, d))
    return quadratic_aggregate(u + noise - noise.mean(axis=0))
