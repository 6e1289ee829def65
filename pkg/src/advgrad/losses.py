"""Convex L-smooth objectives: per-client losses, their mean, and synthetic data.

Three loss families are supported:

* ``Quadratic``: ``(a/2) ||w - c||^2``; the only family with a closed-form
  minimizer, used wherever a sub-optimality gap must be computed exactly.
* ``RobustRegression``: ``(sigmoid(<w, x>) - y)^2``.
* ``BinaryCrossEntropy``: logistic loss, evaluated through softplus so that it
  stays finite for any finite ``w``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import expit

# sup_z |d^2/dz^2 (sigmoid(z) - y)^2|, identical for y = 0 and y = 1.
# Attained at sigmoid(z) = (15 - sqrt(33)) / 24; a second-difference grid
# search over z in [-20, 20] with step 1e-4 gives 0.154058549.
RR_CURVATURE = 0.1540585701213505
# sup_z sigmoid'(z)
BCE_CURVATURE = 0.25


class LossKind(str, enum.Enum):
    QUADRATIC = "quadratic"
    ROBUST_REGRESSION = "rr"
    BINARY_CROSS_ENTROPY = "bce"


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _as_vector(w, d: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.shape[0] != d:
        raise ValueError(f"expected a vector of dimension {d}, got shape {w.shape}")
    return w


@dataclass(frozen=True)
class LabeledPoint:
    x: np.ndarray
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        if self.x.ndim != 1:
            raise ValueError("feature vector must be one-dimensional")
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary-labelled points stored row-wise.

    ``w_true`` is only set for synthetic data and holds the hyperplane the
    labels were drawn from.
    """

    X: np.ndarray
    y: np.ndarray
    w_true: np.ndarray | None = None

    def __post_init__(self):
        X = _frozen(self.X)
        y = _frozen(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("dataset must be a nonempty (n, d) matrix")
        if y.shape != (X.shape[0],):
            raise ValueError("one label per point is required")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be in {0, 1}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.w_true is not None:
            object.__setattr__(self, "w_true", _frozen(self.w_true))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> LabeledPoint:
        return LabeledPoint(self.X[i], int(self.y[i]))

    def __iter__(self) -> Iterator[LabeledPoint]:
        return (self[i] for i in range(self.n))

    @property
    def points(self) -> list[LabeledPoint]:
        return list(self)

    @classmethod
    def from_points(cls, points: Sequence[LabeledPoint]) -> "Dataset":
        if not points:
            raise ValueError("dataset must be nonempty")
        d = points[0].x.shape[0]
        if any(p.x.shape[0] != d for p in points):
            raise ValueError("all points must share one dimensionality")
        return cls(np.stack([p.x for p in points]), np.array([p.y for p in points]))


def _softplus(z):
    return np.logaddexp(0.0, z)


def smoothness_constant(kind: LossKind, point: LabeledPoint) -> float:
    """Smoothness of a point loss: curvature of the link times ``||x||^2``."""
    kind = LossKind(kind)
    sq = float(point.x @ point.x)
    if kind is LossKind.BINARY_CROSS_ENTROPY:
        return BCE_CURVATURE * sq
    if kind is LossKind.ROBUST_REGRESSION:
        return RR_CURVATURE * sq
    raise ValueError("smoothness of a quadratic is its scale, not a point property")


class LossFunction:
    """Common interface: ``eval``, ``grad``, ``smoothness`` and ``d``."""

    kind: LossKind
    smoothness: float
    d: int

    def eval(self, w) -> float:
        raise NotImplementedError

    def grad(self, w) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Quadratic(LossFunction):
    center: np.ndarray
    scale: float = 1.0
    kind: LossKind = field(default=LossKind.QUADRATIC, init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        if not self.scale > 0:
            raise ValueError("quadratic scale must be positive")

    @property
    def d(self) -> int:
        return self.center.shape[0]

    @property
    def smoothness(self) -> float:
        return float(self.scale)

    def eval(self, w) -> float:
        r = _as_vector(w, self.d) - self.center
        return 0.5 * self.scale * float(r @ r)

    def grad(self, w) -> np.ndarray:
        return self.scale * (_as_vector(w, self.d) - self.center)


@dataclass(frozen=True, eq=False)
class PointLoss(LossFunction):
    """Loss of a linear score ``<w, x>`` against a binary label."""

    kind: LossKind
    point: LabeledPoint

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.kind is LossKind.QUADRATIC:
            raise ValueError("use Quadratic for the quadratic family")

    @property
    def d(self) -> int:
        return self.point.x.shape[0]

    @property
    def smoothness(self) -> float:
        return smoothness_constant(self.kind, self.point)

    def eval(self, w) -> float:
        z = float(_as_vector(w, self.d) @ self.point.x)
        return float(_point_values(self.kind, np.array([z]), np.array([self.point.y]))[0])

    def grad(self, w) -> np.ndarray:
        z = float(_as_vector(w, self.d) @ self.point.x)
        coef = _point_coefs(self.kind, np.array([z]), np.array([self.point.y]))[0]
        return coef * self.point.x


def RobustRegression(point: LabeledPoint) -> PointLoss:
    return PointLoss(LossKind.ROBUST_REGRESSION, point)


def BinaryCrossEntropy(point: LabeledPoint) -> PointLoss:
    return PointLoss(LossKind.BINARY_CROSS_ENTROPY, point)


def _point_values(kind: LossKind, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    if kind is LossKind.BINARY_CROSS_ENTROPY:
        # -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
        return np.where(y == 1, _softplus(-z), _softplus(z))
    s = expit(z)
    return (s - y) ** 2


def _point_coefs(kind: LossKind, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d loss / dz for each row; the gradient is this times ``x``."""
    s = expit(z)
    if kind is LossKind.BINARY_CROSS_ENTROPY:
        return s - y
    return 2.0 * (s - y) * s * (1.0 - s)


class AggregateLoss:
    """Mean of member losses, ``f(w) = (1/n) sum_i l_i(w)``.

    Members of a single family are evaluated in one vectorised pass; the
    reduction over members always runs in index order.
    """

    def __init__(self, members: Sequence[LossFunction]):
        members = list(members)
        if not members:
            raise ValueError("cannot aggregate an empty list of losses")
        d = members[0].d
        if any(m.d != d for m in members):
            raise ValueError("all members must share one dimensionality")
        self.members = tuple(members)
        self.d = d
        self.n = len(members)
        self.smoothness = max(m.smoothness for m in members)
        self._member_smoothness = _frozen([m.smoothness for m in members])

        kinds = {m.kind for m in members}
        self._kind = kinds.pop() if len(kinds) == 1 else None
        if self._kind is LossKind.QUADRATIC:
            self._scales = _frozen([m.scale for m in members])
            self._centers = _frozen(np.stack([m.center for m in members]))
        elif self._kind is not None:
            self._X = _frozen(np.stack([m.point.x for m in members]))
            self._y = _frozen([m.point.y for m in members])

    @classmethod
    def from_dataset(cls, ds: Dataset, kind: LossKind) -> "AggregateLoss":
        kind = LossKind(kind)
        return cls([PointLoss(kind, p) for p in ds])

    @property
    def kind(self) -> LossKind | None:
        return self._kind

    @property
    def member_smoothness(self) -> np.ndarray:
        return self._member_smoothness

    def member_grads(self, w, idx=None) -> np.ndarray:
        """Rows are ``grad l_i(w)`` for ``i`` in ``idx`` (all members by default)."""
        w = _as_vector(w, self.d)
        if self._kind is LossKind.QUADRATIC:
            if idx is None:
                return self._scales[:, None] * (w - self._centers)
            return self._scales[idx, None] * (w - self._centers[idx])
        if self._kind is not None:
            X = self._X if idx is None else self._X[idx]
            y = self._y if idx is None else self._y[idx]
            return _point_coefs(self._kind, X @ w, y)[:, None] * X
        chosen = self.members if idx is None else [self.members[i] for i in np.atleast_1d(idx)]
        return np.stack([m.grad(w) for m in chosen])

    def member_values(self, w) -> np.ndarray:
        w = _as_vector(w, self.d)
        if self._kind is LossKind.QUADRATIC:
            r = w - self._centers
            return 0.5 * self._scales * np.einsum("ij,ij->i", r, r)
        if self._kind is not None:
            return _point_values(self._kind, self._X @ w, self._y)
        return np.array([m.eval(w) for m in self.members])

    def eval(self, w) -> float:
        return float(self.member_values(w).sum() / self.n)

    def grad(self, w) -> np.ndarray:
        return self.member_grads(w).sum(axis=0) / self.n

    def minimizer(self) -> np.ndarray:
        """Closed-form minimizer; only available for quadratic members."""
        if self._kind is not LossKind.QUADRATIC:
            raise ValueError("closed-form minimizer is only known for quadratic aggregates")
        return (self._scales[:, None] * self._centers).sum(axis=0) / self._scales.sum()


def aggregate(losses: Sequence[LossFunction]) -> AggregateLoss:
    return AggregateLoss(losses)


def quadratic_aggregate(centers, scales=None) -> AggregateLoss:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if scales is None:
        scales = np.ones(centers.shape[0])
    return AggregateLoss([Quadratic(c, float(a)) for c, a in zip(centers, scales)])


def synth_dataset(
    n: int,
    d: int,
    seed: int,
    separable: bool = False,
    flip_prob: float = 0.1,
) -> Dataset:
    """Uniform features in [-1, 1] with a trailing bias coordinate of 1.

    Labels come from a random hyperplane through the feature cube; unless
    ``separable`` is set, each label is flipped with probability ``flip_prob``.
    """
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    rng = np.random.default_rng(seed)
    X = np.empty((n, d))
    X[:, : d - 1] = rng.uniform(-1.0, 1.0, size=(n, d - 1))
    X[:, d - 1] = 1.0
    w_true = rng.normal(size=d)
    w_true[d - 1] *= 0.25
    y = (X @ w_true > 0).astype(np.int64)
    if not separable:
        flips = rng.random(n) < flip_prob
        y = np.where(flips, 1 - y, y)
    return Dataset(X, y, w_true=w_true)
