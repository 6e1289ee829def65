"""Perturbed gradient oracles and the one-dimensional hard instances.

Every strategy returns a vector within ``epsilon`` of the true gradient. The
check is an ``assert`` so it disappears under ``python -O``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np


class Strategy(str, enum.Enum):
    EXACT = "exact"
    OPPOSING = "opposing"
    AMPLIFYING = "amplifying"
    FIXED_DIRECTION = "fixed-direction"
    ZERO_REPLY = "zero-reply"
    RANDOM_MIX = "random-mix"


# RandomMix picks uniformly among these, in this order.
MIX_CHOICES = (Strategy.OPPOSING, Strategy.AMPLIFYING, Strategy.FIXED_DIRECTION)

_CODE = {s: i for i, s in enumerate(Strategy)}
_MIX_CODES = np.array([_CODE[s] for s in MIX_CHOICES])

LEGALITY_TOL = 1e-12


def default_direction(d: int) -> np.ndarray:
    """Negative first basis vector."""
    u = np.zeros(d)
    u[0] = -1.0
    return u


@dataclass(frozen=True, eq=False)
class OracleStrategy:
    kind: Strategy
    epsilon: float
    direction: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Strategy(self.kind))
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.direction is not None:
            u = np.array(self.direction, dtype=float)
            if not np.isclose(np.linalg.norm(u), 1.0, rtol=0, atol=1e-12):
                raise ValueError("fixed direction must have unit norm")
            u.setflags(write=False)
            object.__setattr__(self, "direction", u)


def _is_legal(reply: np.ndarray, g: np.ndarray, eps: float) -> np.ndarray:
    dev = np.linalg.norm(reply - g, axis=-1)
    scale = np.maximum(1.0, np.linalg.norm(g, axis=-1))
    return dev <= eps + LEGALITY_TOL * scale


def strategy_codes(kinds) -> np.ndarray:
    """Integer codes for a sequence of strategies (int arrays pass through)."""
    if isinstance(kinds, np.ndarray) and kinds.dtype.kind == "i":
        return kinds.astype(np.int64, copy=True)
    return np.array([_CODE[Strategy(k)] for k in kinds], dtype=np.int64)


def perturb_rows(
    G: np.ndarray,
    kinds: Iterable[Strategy] | np.ndarray,
    epsilon: float,
    rng: np.random.Generator | None = None,
    direction: np.ndarray | None = None,
) -> np.ndarray:
    """Apply a strategy to every row of ``G`` (one true gradient per row).

    ``kinds`` holds one strategy per row. Rows tagged ``RANDOM_MIX`` draw their
    concrete strategy from ``rng``, one draw per row in row order.
    """
    G = np.asarray(G, dtype=float)
    n, d = G.shape
    codes = strategy_codes(kinds)
    mix = codes == _CODE[Strategy.RANDOM_MIX]
    if mix.any():
        if rng is None:
            raise ValueError("random-mix replies need a random generator")
        codes[mix] = _MIX_CODES[rng.integers(len(_MIX_CODES), size=int(mix.sum()))]

    norms = np.linalg.norm(G, axis=1)
    unit = np.divide(G, norms[:, None], out=np.zeros_like(G), where=norms[:, None] > 0)

    zero = codes == _CODE[Strategy.ZERO_REPLY]
    # a zero reply is only legal inside the epsilon ball; otherwise oppose
    codes[zero & (norms > epsilon)] = _CODE[Strategy.OPPOSING]
    zero &= norms <= epsilon

    out = G.copy()
    opp = codes == _CODE[Strategy.OPPOSING]
    amp = codes == _CODE[Strategy.AMPLIFYING]
    fixed = codes == _CODE[Strategy.FIXED_DIRECTION]
    out[opp] -= epsilon * unit[opp]
    out[amp] += epsilon * unit[amp]
    if fixed.any():
        u = default_direction(d) if direction is None else np.asarray(direction, dtype=float)
        out[fixed] += epsilon * u
    out[zero] = 0.0

    assert _is_legal(out, G, epsilon).all(), "perturbed reply left the epsilon ball"
    return out


def reply(strategy: OracleStrategy, g_true, rng: np.random.Generator | None = None) -> np.ndarray:
    """Reply of ``strategy`` to a single true gradient."""
    g = np.asarray(g_true, dtype=float)
    if not np.isfinite(g).all():
        raise ValueError("true gradient must be finite")
    row = perturb_rows(g.reshape(1, -1), [strategy.kind], strategy.epsilon, rng, strategy.direction)
    return row[0].reshape(g.shape)


def make_oracle(
    grad: Callable[[np.ndarray], np.ndarray],
    strategy: OracleStrategy,
    seed: int | None = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a true-gradient function into an epsilon-perturbed oracle.

    Each oracle owns its generator, so do not share a random-mix oracle
    between threads; build one per thread with its own seed.
    """
    rng = np.random.default_rng(seed)

    def oracle(w):
        return reply(strategy, grad(w), rng)

    oracle.strategy = strategy
    return oracle


class HardKind(str, enum.Enum):
    F1 = "f1"
    F2 = "f2"
    THM31 = "thm31"


@dataclass(frozen=True)
class HardInstance1D:
    """Piecewise quadratic-then-linear function on the real line.

    ``F1`` is zero left of ``-R``, a quadratic ramp of curvature ``L`` up to
    slope ``epsilon``, then linear; ``F2`` is its mirror image. ``THM31`` is
    ``F1`` with slope ``3 * tau`` and only requires ``R >= 0``.
    """

    R: float
    L: float
    epsilon: float = 0.0
    which: HardKind = HardKind.F1
    tau: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "which", HardKind(self.which))
        if self.which is HardKind.THM31:
            if self.tau is None or not self.tau > 0:
                raise ValueError("THM31 instances need tau > 0")
            if self.R < 0 or not self.L > 0:
                raise ValueError("THM31 instances need R >= 0 and L > 0")
        else:
            if not (self.R >= 1 and self.L >= 1 and 0 < self.epsilon <= 1):
                raise ValueError("F1/F2 need R >= 1, L >= 1 and 0 < epsilon <= 1")

    @property
    def slope(self) -> float:
        return 3.0 * self.tau if self.which is HardKind.THM31 else self.epsilon

    @property
    def d(self) -> int:
        return 1

    @property
    def smoothness(self) -> float:
        return self.L

    @property
    def minimizer(self) -> float:
        """Minimum-norm minimizer."""
        return self.R if self.which is HardKind.F2 else -self.R

    def eval(self, w) -> float:
        return hard_eval(self, float(np.asarray(w).reshape(-1)[0]))

    def grad(self, w) -> np.ndarray:
        return np.array([hard_grad(self, float(np.asarray(w).reshape(-1)[0]))])


def _ramp_value(w: float, R: float, L: float, s: float) -> float:
    if w < -R:
        return 0.0
    if w <= -R + s / L:
        return 0.5 * L * (w + R) ** 2
    return s * w + s * R - s * s / (2.0 * L)


def _ramp_slope(w: float, R: float, L: float, s: float) -> float:
    if w < -R:
        return 0.0
    if w <= -R + s / L:
        return min(L * (w + R), s)
    return s


def hard_eval(inst: HardInstance1D, w: float) -> float:
    if inst.which is HardKind.F2:
        w = -w
    return _ramp_value(w, inst.R, inst.L, inst.slope)


def hard_grad(inst: HardInstance1D, w: float) -> float:
    if inst.which is HardKind.F2:
        return -_ramp_slope(-w, inst.R, inst.L, inst.slope)
    return _ramp_slope(w, inst.R, inst.L, inst.slope)


def thm31_adversary_finalize(query_points, w_out: float, tau: float, L: float) -> HardInstance1D:
    """Fix the hidden offset after the optimizer has finished.

    The adversary answered every query with ``3 * tau``. Placing the ramp at
    least one unit left of every point the optimizer touched makes those
    answers exact, while ``f(w_out) >= 3 * tau`` although ``min f = 0``.
    """
    v = min([float(q) for q in query_points] + [float(w_out)])
    R = max(0.0, 3.0 * tau / L - v + 1.0)
    return HardInstance1D(R=R, L=L, which=HardKind.THM31, tau=tau)
