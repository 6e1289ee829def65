"""Result rows and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable

FIELDS = ("experiment", "seed", "strategy", "epsilon", "k", "K", "Q", "loss", "gap", "queries")
_INT_FIELDS = {"seed", "k", "K", "Q", "queries"}
_FLOAT_FIELDS = {"epsilon", "loss", "gap"}


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int | None
    strategy: str
    epsilon: float
    k: int | None = None
    K: int | None = None
    Q: int | None = None
    loss: float | None = None
    gap: float | None = None
    queries: int | None = None


assert tuple(f.name for f in fields(ResultRow)) == FIELDS


def _key(row: ResultRow):
    def num(v):
        return (0, 0) if v is None else (1, v)

    return (row.experiment, row.strategy, num(row.epsilon), num(row.K), num(row.Q), num(row.seed), num(row.k))


def sort_rows(rows: Iterable[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=_key)


def _fmt(name: str, value) -> str:
    if value is None:
        return ""
    if name in _FLOAT_FIELDS:
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite {name}: {value}")
        return "%.17g" % value
    if name in _INT_FIELDS:
        return str(int(value))
    return str(value)


def to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    for row in rows:
        writer.writerow([_fmt(n, v) for n, v in zip(FIELDS, astuple(row))])
    return buf.getvalue()


def to_json(rows: Iterable[ResultRow]) -> str:
    # written by hand so floats carry exactly 17 significant digits
    items = []
    for row in rows:
        parts = []
        for name, value in zip(FIELDS, astuple(row)):
            if value is None:
                text = "null"
            elif name in _FLOAT_FIELDS or name in _INT_FIELDS:
                text = _fmt(name, value)
            else:
                text = json.dumps(value)
            parts.append(f'"{name}": {text}')
        items.append("  {" + ", ".join(parts) + "}")
    if not items:
        return "[]\n"
    return "[\n" + ",\n".join(items) + "\n]\n"


def emit(rows: Iterable[ResultRow], path, format: str = "csv", sort: bool = True) -> None:
    rows = sort_rows(rows) if sort else list(rows)
    if format == "csv":
        text = to_csv(rows)
    elif format == "json":
        text = to_json(rows)
    else:
        raise ValueError(f"unknown format {format!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc


def _parse(name: str, value):
    if value is None or value == "":
        return None
    if name in _INT_FIELDS:
        return int(value)
    if name in _FLOAT_FIELDS:
        return float(value)
    return str(value)


def read_results(path, format: str | None = None) -> list[ResultRow]:
    path = Path(path)
    format = format or path.suffix.lstrip(".")
    text = path.read_text()
    if format == "json":
        return [ResultRow(**{n: _parse(n, obj[n]) for n in FIELDS}) for obj in json.loads(text)]
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != FIELDS:
        raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
    return [ResultRow(**{n: _parse(n, rec[n]) for n in FIELDS}) for rec in reader]
