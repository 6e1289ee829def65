"""LIBSVM sparse text format: reading, writing, and preprocessing to binary datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..losses import Dataset


class LibsvmFormatError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class RawDataset:
    """Dense features with labels exactly as they appear in the file."""

    X: np.ndarray
    labels: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _parse_line(text: str, path, lineno: int):
    tokens = text.split()
    try:
        label = float(tokens[0])
    except ValueError:
        raise LibsvmFormatError(path, lineno, f"non-numeric label {tokens[0]!r}") from None
    if not math.isfinite(label):
        raise LibsvmFormatError(path, lineno, f"non-finite label {tokens[0]!r}")
    entries = []
    last = 0
    for tok in tokens[1:]:
        idx_s, sep, val_s = tok.partition(":")
        if idx_s == "qid":
            continue
        if not sep:
            raise LibsvmFormatError(path, lineno, f"expected index:value, got {tok!r}")
        try:
            idx = int(idx_s)
        except ValueError:
            raise LibsvmFormatError(path, lineno, f"non-integer feature index {idx_s!r}") from None
        try:
            val = float(val_s)
        except ValueError:
            raise LibsvmFormatError(path, lineno, f"non-numeric feature value {val_s!r}") from None
        if idx < 1:
            raise LibsvmFormatError(path, lineno, f"feature indices are 1-based, got {idx}")
        if idx <= last:
            raise LibsvmFormatError(path, lineno, f"feature index {idx} does not increase (previous {last})")
        if not math.isfinite(val):
            raise LibsvmFormatError(path, lineno, f"non-finite feature value {val_s!r}")
        entries.append((idx, val))
        last = idx
    return label, entries


def parse_libsvm(path, n_features: int | None = None) -> RawDataset:
    """Read a LIBSVM file into a dense matrix.

    The dimensionality is the largest index seen, or ``n_features`` when that
    is given (files often omit trailing zero features). Blank lines and
    ``#`` comments are skipped; ``qid:`` tokens are ignored.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc

    labels, rows = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        label, entries = _parse_line(line, path, lineno)
        if n_features is not None and entries and entries[-1][0] > n_features:
            raise LibsvmFormatError(path, lineno, f"feature index {entries[-1][0]} exceeds n_features={n_features}")
        labels.append(label)
        rows.append(entries)
    if not rows:
        raise LibsvmFormatError(path, 0, "no data lines")

    d = max((e[-1][0] for e in rows if e), default=0)
    if n_features is not None:
        d = n_features
    X = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for idx, val in entries:
            X[i, idx - 1] = val
    return RawDataset(X, np.array(labels))


def _fmt_label(y: float) -> str:
    return str(int(y)) if float(y).is_integer() else repr(float(y))


def write_libsvm(path, X, labels) -> None:
    """Write dense rows as LIBSVM lines, omitting zero entries."""
    X = np.asarray(X, dtype=float)
    lines = []
    for row, y in zip(X, labels):
        feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in enumerate(row) if v != 0)
        lines.append(f"{_fmt_label(y)} {feats}".rstrip())
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Preprocessing:
    label_map: Mapping[float, int]
    drop_dims: tuple[int, ...] = ()
    raw_d: int | None = None
    notes: str = field(default="", compare=False)


PRESETS = {
    "ijcnn1": Preprocessing({-1: 0, 1: 1}, (), 22, "labels -1/+1 -> 0/1, bias appended"),
    "covtype": Preprocessing({1: 0, 2: 1}, (), 54, "labels 1/2 -> 0/1, bias appended"),
    "higgs": Preprocessing({0: 0, 1: 1}, (9, 13, 17, 21), 28, "features 9, 13, 17, 21 dropped, bias appended"),
}


def preprocess(ds: RawDataset, label_map: Mapping[float, int], drop_dims=()) -> Dataset:
    """Map labels into {0, 1}, drop features (1-based indices), append a bias of 1."""
    drop = sorted(set(int(j) for j in drop_dims))
    if any(j < 1 or j > ds.d for j in drop):
        raise ValueError(f"drop_dims must be 1-based indices in [1, {ds.d}]")
    y = np.empty(ds.n, dtype=np.int64)
    for i, raw in enumerate(ds.labels):
        try:
            y[i] = label_map[float(raw)]
        except KeyError:
            raise ValueError(f"label {raw!r} of point {i} has no mapping") from None
    keep = [j for j in range(ds.d) if j + 1 not in drop]
    X = np.hstack([ds.X[:, keep], np.ones((ds.n, 1))])
    return Dataset(X, y)


def parse_label_map(text: str) -> dict[float, int]:
    """Parse ``"-1:0,1:1"`` into ``{-1.0: 0, 1.0: 1}``."""
    out = {}
    for item in text.split(","):
        raw, _, mapped = item.partition(":")
        out[float(raw)] = int(mapped)
    return out
