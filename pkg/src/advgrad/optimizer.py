"""Gradient descent with step ``1/(2L)`` against a perturbed oracle.

``agp_opt`` stops as soon as a reply has norm below ``4 * epsilon``; with that
rule and the iteration budget of ``k_schedule`` the final sub-optimality gap
is at most ``tau`` whenever ``tau >= 5 * epsilon * ||w*||``. ``plain_gd`` runs
the same loop without the early stop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

Oracle = Callable[[np.ndarray], np.ndarray]


class Termination(str, enum.Enum):
    EARLY_STOP = "early-stop"
    BUDGET_EXHAUSTED = "budget-exhausted"


class NonFiniteReplyError(FloatingPointError):
    def __init__(self, iteration: int):
        super().__init__(f"oracle returned a non-finite reply at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class OptimizerConfig:
    L: float
    epsilon: float
    R: float
    tau: float
    K_override: int | None = None
    early_stop: bool = True
    w0: np.ndarray | None = None

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.K_override is not None and self.K_override < 0:
            raise ValueError("K_override must be nonnegative")

    @property
    def step(self) -> float:
        return 1.0 / (2.0 * self.L)

    @property
    def outside_guarantee(self) -> bool:
        """True when ``tau < 5 * epsilon * R``, where the gap bound is not promised."""
        return self.tau < 5.0 * self.epsilon * self.R

    @property
    def K(self) -> int:
        return self.K_override if self.K_override is not None else k_schedule(self)


@dataclass
class OptimizerRun:
    """Trajectory of one run.

    With ``record="stream"`` only the final iterate and reply are kept in
    ``iterates``/``replies``; ``losses`` and ``reply_norms`` are always complete.
    """

    iterates: np.ndarray
    replies: np.ndarray
    losses: np.ndarray
    reply_norms: np.ndarray
    terminated_by: Termination
    queries_used: int
    outside_guarantee: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def w_out(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def K_prime(self) -> int:
        """Iteration index at which the run stopped."""
        return len(self.reply_norms) - (1 if self.terminated_by is Termination.EARLY_STOP else 0)


def k_schedule(cfg: OptimizerConfig) -> int:
    """Iteration budget ``ceil(min(5 L R^2 / (4 tau), L R / (4 eps)))``."""
    if not cfg.tau > 0:
        raise ValueError("tau must be positive")
    if not cfg.R > 0:
        raise ValueError("R must be positive")
    K = 5.0 * cfg.L * cfg.R**2 / (4.0 * cfg.tau)
    if cfg.epsilon > 0:
        K = min(K, cfg.L * cfg.R / (4.0 * cfg.epsilon))
    return max(1, math.ceil(K))


def _run(f, oracle: Oracle, cfg: OptimizerConfig, early_stop: bool, record: str, true_grad) -> OptimizerRun:
    if record not in ("full", "stream"):
        raise ValueError("record must be 'full' or 'stream'")
    K = cfg.K
    if cfg.w0 is not None:
        w = np.array(cfg.w0, dtype=float)
    elif f is not None:
        w = np.zeros(f.d)
    else:
        raise ValueError("need cfg.w0 when no objective is given")
    step = cfg.step
    threshold = 4.0 * cfg.epsilon

    iterates = [w.copy()]
    replies: list[np.ndarray] = []
    losses = [f.eval(w)] if f is not None else []
    norms: list[float] = []
    terminated = Termination.BUDGET_EXHAUSTED
    calls = 0
    for k in range(K):
        g = np.asarray(oracle(w), dtype=float)
        calls += 1
        if not np.isfinite(g).all():
            raise NonFiniteReplyError(k)
        if true_grad is not None:
            dev = float(np.linalg.norm(g - true_grad(w)))
            assert dev <= cfg.epsilon + 1e-12 * max(1.0, float(np.linalg.norm(g))), (
                f"illegal oracle reply at iteration {k}: deviation {dev}"
            )
        gnorm = float(np.linalg.norm(g))
        norms.append(gnorm)
        if record == "full":
            replies.append(g)
        else:
            replies = [g]
        if early_stop and gnorm < threshold:
            terminated = Termination.EARLY_STOP
            break
        w = w - step * g
        if record == "full":
            iterates.append(w)
        else:
            iterates = [w]
        if f is not None:
            losses.append(f.eval(w))

    d = w.shape[0]
    return OptimizerRun(
        iterates=np.array(iterates).reshape(-1, d),
        replies=np.array(replies).reshape(-1, d),
        losses=np.array(losses, dtype=float),
        reply_norms=np.array(norms),
        terminated_by=terminated,
        queries_used=calls,
        outside_guarantee=cfg.outside_guarantee,
    )


def agp_opt(f, oracle: Oracle, cfg: OptimizerConfig, *, record: str = "full", true_grad=None) -> OptimizerRun:
    """Run the early-stopping descent.

    Parameters
    ----------
    f : objective with ``eval`` and ``d``, or None
        Only used to record ``losses``; the algorithm itself sees the oracle
        alone. Pass None when the objective is not known during the run.
    oracle : callable
        Maps an iterate to a gradient estimate.
    cfg : OptimizerConfig
    record : {"full", "stream"}
    true_grad : callable, optional
        If given, every reply is asserted to lie within ``cfg.epsilon`` of it.
    """
    return _run(f, oracle, cfg, cfg.early_stop, record, true_grad)


def plain_gd(f, oracle: Oracle, cfg: OptimizerConfig, *, record: str = "full", true_grad=None) -> OptimizerRun:
    """Same loop as :func:`agp_opt` with the early stop disabled."""
    return _run(f, oracle, replace(cfg, early_stop=False), False, record, true_grad)


def suboptimality_gap(run: OptimizerRun, f, w_star) -> float:
    if w_star is None:
        raise ValueError("the minimizer is unknown; compare losses against the best observed value instead")
    gap = f.eval(run.w_out) - f.eval(np.asarray(w_star, dtype=float).reshape(-1))
    if gap < -1e-12:
        raise ValueError(f"negative gap {gap}: w_star is not a minimizer")
    return float(gap)


def finite_budget_gap_bound(L: float, epsilon: float, w_star_norm: float, K: int) -> float:
    """``eps ||w*|| + max(4 eps ||w*||, L ||w*||^2 / K)``."""
    return epsilon * w_star_norm + max(4.0 * epsilon * w_star_norm, L * w_star_norm**2 / K)


def gd_gap_bound(epsilon: float, w_star_norm: float, R: float) -> float:
    """Gap bound for plain GD on the scheduled budget: ``5 eps ||w*|| + 5 eps R / 2``."""
    return 5.0 * epsilon * w_star_norm + 2.5 * epsilon * R
