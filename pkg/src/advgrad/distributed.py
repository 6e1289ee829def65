"""Server/client simulation with per-query accounting.

Each client holds one member loss of an :class:`~advgrad.losses.AggregateLoss`
and answers gradient queries through its perturbation policy. The server
builds an oracle for the aggregate either by querying every client or by
averaging over clients sampled uniformly with replacement.

Reading true gradients is reserved for instrumentation (``B0``, legality
checks, loss recording) and raises when the pool is built with
``omniscient=False``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .estimation import required_m
from .losses import AggregateLoss
from .optimizer import OptimizerConfig, OptimizerRun, agp_opt, plain_gd
from .oracle import OracleStrategy, Strategy, default_direction, perturb_rows, strategy_codes

RANDOMIZED_MARGIN = 5.01


class ProtocolError(RuntimeError):
    """Raised when protocol-faithful code asks for omniscient information."""


@dataclass(frozen=True, eq=False)
class Client:
    id: int
    loss: object
    policy: OracleStrategy


class ClientPool:
    """The n clients, their policies, and a monotone query counter.

    Parameters
    ----------
    f : AggregateLoss
        Member ``i`` is client ``i``'s loss.
    policies : Strategy or sequence of Strategy
        One policy for everyone, or one per client.
    epsilon : float
        Perturbation bound shared by all clients.
    seed : int
        Seeds the sampling stream and the random-mix stream, which are
        independent children of one seed sequence.
    """

    def __init__(
        self,
        f: AggregateLoss,
        policies: Strategy | str | Sequence[Strategy | str],
        epsilon: float,
        seed: int = 0,
        direction=None,
        omniscient: bool = True,
    ):
        if isinstance(policies, (Strategy, str)):
            policies = [Strategy(policies)] * f.n
        policies = [Strategy(p) for p in policies]
        if len(policies) != f.n:
            raise ValueError("need one policy per client")
        if not epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        self.f = f
        self.epsilon = float(epsilon)
        self.direction = default_direction(f.d) if direction is None else np.asarray(direction, dtype=float)
        self.policies = tuple(policies)
        self._codes = strategy_codes(policies)
        self.omniscient = omniscient
        self.seed = seed
        sample_seq, mix_seq = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(sample_seq)
        self._mix_rng = np.random.default_rng(mix_seq)
        self._query_count = 0

    @property
    def n(self) -> int:
        return self.f.n

    @property
    def d(self) -> int:
        return self.f.d

    @property
    def query_count(self) -> int:
        return self._query_count

    @property
    def clients(self) -> list[Client]:
        return [
            Client(i, m, OracleStrategy(p, self.epsilon, self.direction if p is Strategy.FIXED_DIRECTION else None))
            for i, (m, p) in enumerate(zip(self.f.members, self.policies))
        ]

    def _replies(self, w, idx) -> np.ndarray:
        G = self.f.member_grads(w, idx)
        codes = self._codes if idx is None else self._codes[idx]
        out = perturb_rows(G, codes, self.epsilon, self._mix_rng, self.direction)
        self._query_count += G.shape[0]
        return out

    def true_gradient(self, w) -> np.ndarray:
        self._require_omniscience()
        return self.f.grad(w)

    def _require_omniscience(self):
        if not self.omniscient:
            raise ProtocolError("true gradients are not available in protocol-faithful mode")


def query(pool: ClientPool, i: int, w) -> np.ndarray:
    """One approximate gradient query to client ``i``."""
    if not 0 <= i < pool.n:
        raise IndexError(f"client index {i} out of range for {pool.n} clients")
    return pool._replies(w, np.array([i]))[0]


def full_oracle(pool: ClientPool, w) -> np.ndarray:
    """Query every client once and average the replies in client order."""
    v = pool._replies(w, None).sum(axis=0) / pool.n
    if __debug__ and pool.omniscient:
        g = pool.f.grad(w)
        assert np.linalg.norm(v - g) <= pool.epsilon + 1e-12 * max(1.0, float(np.linalg.norm(g))), (
            "averaged reply left the epsilon ball"
        )
    return v


def sampled_oracle(pool: ClientPool, w, m: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Average the replies of ``m`` clients drawn uniformly with replacement."""
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = pool.rng if rng is None else rng
    draws = rng.integers(pool.n, size=m)
    return pool._replies(w, draws).sum(axis=0) / m


def compute_B0(pool: ClientPool) -> float:
    """Largest true client gradient norm at the origin."""
    pool._require_omniscience()
    G = pool.f.member_grads(np.zeros(pool.d))
    return float(np.linalg.norm(G, axis=1).max())


@dataclass(frozen=True)
class SampledOracleConfig:
    tau: float
    R: float
    delta: float
    epsilon: float = 0.0
    B: float | None = None
    c_m: float = 32.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not (self.tau > 0 and self.R > 0):
            raise ValueError("tau and R must be positive")

    @property
    def t(self) -> float:
        return self.tau / (5.0 * self.R) - self.epsilon


def sampled_schedule(cfg: SampledOracleConfig, K: int) -> tuple[int, float, float]:
    """Per-iteration sample size ``m``, deviation ``t`` and per-step failure ``delta / K``.

    ``m`` is the smallest count with ``2 exp(-t^2 m / (c_m B^2)) <= delta / K``
    and ``2 B / sqrt(m) <= t / 2``.
    """
    if cfg.tau < RANDOMIZED_MARGIN * cfg.epsilon * cfg.R:
        raise ValueError(
            f"outside randomized-guarantee regime: tau={cfg.tau} < {RANDOMIZED_MARGIN} * eps * R"
        )
    if cfg.B is None or not cfg.B > 0:
        raise ValueError("sampled_schedule needs a positive gradient bound B")
    if K < 1:
        raise ValueError("K must be at least 1")
    t = cfg.t
    delta_prime = cfg.delta / K
    m = required_m(cfg.B, t, delta_prime, c=cfg.c_m)
    return m, t, delta_prime


class Mode(str, enum.Enum):
    FULL = "full"
    SAMPLED = "sampled"
    BUDGET = "budget"


@dataclass(frozen=True)
class Budget:
    Q: int
    K: int


def run_dlagp(
    pool: ClientPool,
    cfg: OptimizerConfig,
    mode: Mode | str = Mode.FULL,
    sampled: SampledOracleConfig | None = None,
    budget: Budget | None = None,
    record: str = "full",
) -> OptimizerRun:
    """Drive the optimizer with an oracle built from client queries.

    * ``full``: every client per iteration, early-stopping descent.
    * ``sampled``: ``m`` sampled clients per iteration with ``m`` and the
      effective perturbation ``t + eps`` from :func:`sampled_schedule`; ``B``
      defaults to ``B0 + (17/8) L R``.
    * ``budget``: plain descent for exactly ``K`` iterations with
      ``floor(Q / K)`` sampled clients each.

    ``run.queries_used`` counts client queries, and ``run.extra`` records the
    mode parameters.
    """
    mode = Mode(mode)
    f = pool.f if pool.omniscient else None
    start = pool.query_count
    extra: dict = {"mode": mode.value}

    if mode is Mode.FULL:
        run = agp_opt(f, lambda w: full_oracle(pool, w), cfg, record=record)
    elif mode is Mode.SAMPLED:
        if sampled is None:
            raise ValueError("sampled mode needs a SampledOracleConfig")
        sampled = replace(sampled, epsilon=pool.epsilon)
        if sampled.B is None:
            sampled = replace(sampled, B=compute_B0(pool) + 17.0 / 8.0 * cfg.L * sampled.R)
        # with the effective perturbation t + eps = tau / (5R) both branches of
        # the schedule coincide at 5 L R^2 / (4 tau)
        eff = replace(cfg, epsilon=sampled.tau / (5.0 * sampled.R), R=sampled.R, tau=sampled.tau)
        K = eff.K
        m, t, delta_prime = sampled_schedule(sampled, K)
        eff = replace(eff, K_override=K)
        run = agp_opt(f, lambda w: sampled_oracle(pool, w, m), eff, record=record)
        extra.update(m=m, t=t, delta_prime=delta_prime, B=sampled.B, K=K)
    else:
        if budget is None:
            raise ValueError("budget mode needs a Budget")
        if budget.Q < budget.K:
            raise ValueError(f"query budget Q={budget.Q} is smaller than K={budget.K}")
        m = budget.Q // budget.K
        run = plain_gd(f, lambda w: sampled_oracle(pool, w, m), replace(cfg, K_override=budget.K), record=record)
        extra.update(m=m, K=budget.K, Q=budget.Q)

    run.queries_used = pool.query_count - start
    run.extra.update(extra)
    return run


def expected_queries(run: OptimizerRun, n: int) -> int:
    """Analytic query count for a finished run, per mode."""
    calls = len(run.reply_norms)
    mode = run.extra.get("mode")
    if mode == Mode.FULL.value:
        return n * calls
    return run.extra["m"] * calls

