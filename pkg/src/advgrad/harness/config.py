"""Declarative experiment description and the flat ``key = value`` config format.

Example config file::

    # loss-versus-iteration sweep on synthetic data
    experiment = oracle-sweep
    loss = bce
    n = 500
    d = 5
    strategies = opposing, amplifying, fixed-direction
    epsilons = 0, 0.01, 0.04, 0.16
    K = 2000
    seeds = 0

List values are comma separated. Flags given on the command line override
values read from the file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from ..losses import LossKind
from ..oracle import Strategy


class ConfigError(ValueError):
    pass


EXPERIMENTS = ("oracle-sweep", "budget-sweep", "lower-bound", "center-est")


def _floats(text) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text) -> list[int]:
    return [int(float(x)) for x in str(text).split(",") if x.strip()]


def _bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "oracle-sweep"
    # dataset: "synthetic" or a LIBSVM path
    data: str = "synthetic"
    preset: str | None = None
    n: int = 500
    d: int = 5
    data_seed: int = 0
    separable: bool = False
    flip_prob: float = 0.1
    loss: LossKind = LossKind.BINARY_CROSS_ENTROPY
    strategies: tuple[Strategy, ...] = (Strategy.OPPOSING, Strategy.AMPLIFYING, Strategy.FIXED_DIRECTION)
    epsilons: tuple[float, ...] = (0.0, 0.01, 0.04, 0.16)
    K: tuple[int, ...] = (1000,)
    Q: tuple[int, ...] = (10_000,)
    seeds: tuple[int, ...] = (0,)
    R: tuple[float, ...] = (1.0, 2.0)
    L: tuple[float, ...] = (1.0, 4.0)
    tau: tuple[float, ...] = (1.0,)
    delta: float = 0.05
    t: float = 0.3
    B: float = 1.0
    trials: int = 2000
    out: str | None = None
    format: str = "csv"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for name in ("strategies", "epsilons", "K", "Q", "seeds", "R", "L", "tau"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if any(e < 0 for e in self.epsilons):
            raise ConfigError("epsilons must be nonnegative")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs: dict = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                kwargs[key] = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        return cls(**kwargs)


def _convert(key: str, raw):
    if key in ("epsilons", "R", "L", "tau"):
        return tuple(_floats(raw)) if isinstance(raw, str) else tuple(float(x) for x in raw)
    if key in ("K", "Q", "seeds"):
        return tuple(_ints(raw)) if isinstance(raw, str) else tuple(int(x) for x in raw)
    if key == "strategies":
        if isinstance(raw, str) and not isinstance(raw, Strategy):
            raw = [s.strip() for s in raw.split(",") if s.strip()]
        return tuple(Strategy(s) for s in raw)
    if key == "loss":
        return LossKind(raw.strip() if type(raw) is str else raw)
    if key in ("n", "d", "data_seed", "trials", "workers"):
        return int(raw)
    if key in ("flip_prob", "delta", "t", "B"):
        return float(raw)
    if key == "separable":
        return _bool(raw)
    return None if raw in (None, "") else str(raw).strip()


def read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        values[key.strip()] = value.strip()
    return values
