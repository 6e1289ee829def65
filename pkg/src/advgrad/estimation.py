"""Estimating the mean of bounded vectors from uniform samples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray
    B: float

    def __post_init__(self):
        P = np.array(self.points, dtype=float)
        if P.ndim != 2 or P.shape[0] == 0:
            raise ValueError("need a nonempty (n, d) array of points")
        norms = np.linalg.norm(P, axis=1)
        if norms.max() > self.B * (1 + 1e-12):
            raise ValueError(f"declared bound B={self.B} is below the largest norm {norms.max()}")
        P.setflags(write=False)
        object.__setattr__(self, "points", P)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @classmethod
    def tight(cls, points) -> "PointSet":
        P = np.asarray(points, dtype=float)
        return cls(P, float(np.linalg.norm(P, axis=1).max()))


def true_center(ps: PointSet) -> np.ndarray:
    return ps.points.sum(axis=0) / ps.n


def sampled_center(ps: PointSet, m: int, rng: np.random.Generator) -> np.ndarray:
    """Mean of ``m`` points drawn uniformly with replacement."""
    if m < 1:
        raise ValueError("m must be at least 1")
    idx = rng.integers(ps.n, size=m)
    return ps.points[idx].sum(axis=0) / m


def sampled_centers(ps: PointSet, m: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """``trials`` independent sampled centers, one per row."""
    idx = rng.integers(ps.n, size=(trials, m))
    return ps.points[idx].sum(axis=1) / m


def required_m(B: float, t: float, delta: float, c: float = 32.0) -> int:
    """Smallest ``m`` making ``P[||sampled - true|| > t] <= delta``.

    Two conditions from the bounded-differences argument: the tail
    ``2 exp(-t^2 m / (c B^2))`` is at most ``delta`` (``c = 32``), and the
    expected deviation ``2 B / sqrt(m)`` is at most ``t / 2``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if B == 0:
        return 1
    ratio = (B / t) ** 2
    m = max(math.ceil(c * ratio * math.log(2.0 / delta)), math.ceil(16.0 * ratio), 1)
    # guard against ceil landing one short after rounding
    while 2.0 * math.exp(-m / (c * ratio)) > delta or 2.0 * B / math.sqrt(m) > t / 2.0:
        m += 1
    return m


def failure_rate(ps: PointSet, m: int, t: float, trials: int, seed: int, chunk: int = 500) -> float:
    """Empirical ``P[||sampled_center - true_center|| > t]`` over seeded trials."""
    rng = np.random.default_rng(seed)
    center = true_center(ps)
    fails = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        err = np.linalg.norm(sampled_centers(ps, m, k, rng) - center, axis=1)
        fails += int((err > t).sum())
        done += k
    return fails / trials
