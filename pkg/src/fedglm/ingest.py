"""CSV loading, design-matrix construction, partitioning and synthetic data."""
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyFile,
    InvalidPartition,
    MissingColumn,
    ParseError,
    UnknownLevel,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnSpec:
    kind: str = NUMERIC
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ConfigError(f"unknown column kind {self.kind!r}")
        levels = tuple(str(v) for v in self.levels)
        if self.kind == CATEGORICAL:
            if not levels:
                raise ConfigError("categorical column needs at least one level")
            if len(set(levels)) != len(levels):
                raise ConfigError(f"duplicate levels in {levels}")
        object.__setattr__(self, "levels", levels)


@dataclass(frozen=True)
class DatasetSchema:
    """Which columns to use and how to encode them.

    The first level of a categorical column is its reference level.
    """

    response: str
    predictors: tuple
    columns: Dict[str, ColumnSpec] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if self.response in self.predictors:
            raise ConfigError(f"response {self.response!r} is also a predictor")
        if len(set(self.predictors)) != len(self.predictors):
            raise ConfigError("duplicate predictor names")

    def spec(self, name: str) -> ColumnSpec:
        return self.columns.get(name, ColumnSpec())

    @property
    def used(self) -> tuple:
        return (self.response,) + self.predictors

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            cols = {
                name: ColumnSpec(c.get("kind", NUMERIC), tuple(c.get("levels", ())))
                for name, c in d.get("columns", {}).items()
            }
            return cls(d["response"], tuple(d["predictors"]), cols)
        except KeyError as e:
            raise ConfigError(f"schema is missing key {e.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {
            "response": self.response,
            "predictors": list(self.predictors),
            "columns": {
                k: ({"kind": v.kind, "levels": list(v.levels)} if v.kind == CATEGORICAL
                    else {"kind": v.kind})
                for k, v in self.columns.items()
            },
        }


def load_schema(path) -> DatasetSchema:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"schema file {path} is not valid JSON: {e}") from None
    return DatasetSchema.from_dict(d)


def _read_rows(path, delimiter):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFile(f"{path} has no header row")
        header = [h.strip() for h in header]
        rows = [r for r in reader if r]
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")
    return header, rows


def parse_csv(path, schema: DatasetSchema, delimiter: str = ",") -> Dict[str, object]:
    """Read the schema's columns from ``path``.

    Numeric columns come back as float arrays, categorical ones as lists of
    strings. Row numbers in errors are 1-based data rows (header excluded).
    """
    header, rows = _read_rows(path, delimiter)
    table = {}
    for name in schema.used:
        if name not in header:
            raise MissingColumn(name)
        j = header.index(name)
        raw = []
        for i, r in enumerate(rows, start=1):
            if j >= len(r):
                raise ParseError(i, name, "")
            raw.append(r[j].strip())
        if schema.spec(name).kind == NUMERIC:
            values = np.empty(len(raw))
            for i, v in enumerate(raw):
                try:
                    values[i] = float(v)
                except ValueError:
                    raise ParseError(i + 1, name, v) from None
                if not np.isfinite(values[i]):
                    raise ParseError(i + 1, name, v)
            table[name] = values
        else:
            table[name] = raw
    return table


def infer_schema(path, response: str, predictors: Sequence[str],
                 delimiter: str = ",") -> DatasetSchema:
    """Numeric where every value parses as a float, else categorical with
    levels in sorted order."""
    header, rows = _read_rows(path, delimiter)
    columns = {}
    for name in (response, *predictors):
        if name not in header:
            raise MissingColumn(name)
        j = header.index(name)
        values = [r[j].strip() for r in rows if j < len(r)]
        try:
            for v in values:
                float(v)
        except ValueError:
            columns[name] = ColumnSpec(CATEGORICAL, tuple(sorted(set(values))))
    return DatasetSchema(response, tuple(predictors), columns)


class Design(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    names: List[str]


def _indicators(values, name, levels):
    index = {lv: k for k, lv in enumerate(levels)}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        try:
            codes[i] = index[v]
        except KeyError:
            raise UnknownLevel(i + 1, name, v) from None
    return codes


def build_design(table, schema: DatasetSchema, intercept: bool = True) -> Design:
    """Encode ``table`` into (X, y, column names).

    Column order: intercept, numeric predictors, then L-1 indicator columns
    per categorical predictor named ``col.level`` (reference level omitted).
    """
    n = len(table[schema.response])
    cols, names = [], []
    if intercept:
        cols.append(np.ones(n))
        names.append("(Intercept)")
    for name in schema.predictors:
        if schema.spec(name).kind == NUMERIC:
            cols.append(np.asarray(table[name], dtype=np.float64))
            names.append(name)
    for name in schema.predictors:
        spec = schema.spec(name)
        if spec.kind != CATEGORICAL:
            continue
        codes = _indicators(table[name], name, spec.levels)
        for k, level in enumerate(spec.levels[1:], start=1):
            cols.append((codes == k).astype(np.float64))
            names.append(f"{name}.{level}")
    if not cols:
        raise DataError("design has no columns")
    x = np.column_stack(cols)

    rspec = schema.spec(schema.response)
    if rspec.kind == NUMERIC:
        y = np.asarray(table[schema.response], dtype=np.float64)
    else:
        if len(rspec.levels) != 2:
            raise DataError(
                f"categorical response {schema.response!r} needs exactly two levels, "
                f"got {len(rspec.levels)}"
            )
        y = _indicators(table[schema.response], schema.response, rspec.levels).astype(np.float64)
    return Design(x, y, names)


def partition_rows(n_rows: int, n_nodes: int) -> List[range]:
    """Equal shares of floor(n/N) rows; the last node also takes the remainder."""
    if n_nodes < 1 or n_nodes > n_rows:
        raise InvalidPartition(f"cannot split {n_rows} rows across {n_nodes} nodes")
    size = n_rows // n_nodes
    bounds = [k * size for k in range(n_nodes)] + [n_rows]
    return [range(bounds[k], bounds[k + 1]) for k in range(n_nodes)]


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    p: int
    beta_true: float = 3.0
    noise: float = 1.0
    seed: int = 0
    kind: str = "lm"

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigError("synthetic data needs n >= 1 and p >= 1")
        if self.noise < 0:
            raise ConfigError("noise must be nonnegative")
        if self.kind not in ("lm", "glm-binomial"):
            raise ConfigError(f"unknown synthetic kind {self.kind!r}")


def gen_synthetic(spec: SyntheticSpec) -> Design:
    """Draw ``X = [1 | Z]`` with Z standard normal (n x p) and a response.

    The generator is numpy's PCG64 seeded with ``spec.seed``; normal
    deviates use numpy's ziggurat sampler. Draw order: Z row-major, then
    one deviate per row (normal noise for ``lm``, uniform for the
    Bernoulli draw of ``glm-binomial``). Every coefficient, intercept
    included, equals ``beta_true``.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    z = rng.standard_normal((spec.n, spec.p))
    x = np.column_stack([np.ones(spec.n), z])
    eta = x @ np.full(spec.p + 1, float(spec.beta_true))
    if spec.kind == "lm":
        y = eta + spec.noise * rng.standard_normal(spec.n)
    else:
        prob = 1.0 / (1.0 + np.exp(-eta))
        y = (rng.random(spec.n) < prob).astype(np.float64)
    names = ["(Intercept)"] + [f"x{j}" for j in range(1, spec.p + 1)]
    return Design(x, y, names)
