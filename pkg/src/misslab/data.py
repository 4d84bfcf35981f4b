"""Tables with missing cells, missingness mechanisms and CSV I/O.

A :class:`Table` stores its cells in a float matrix where ``NaN`` marks a
missing cell; binary columns hold 0.0/1.0 when observed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import ParseError, SchemaError

BINARY = "binary"
CONTINUOUS = "continuous"
KINDS = (BINARY, CONTINUOUS)
MISSING_TOKEN = "NA"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str


class Table:
    """Immutable n x p grid of binary/continuous cells, ``NaN`` = missing."""

    __slots__ = ("columns", "_values", "_index")

    def __init__(self, columns: Sequence[Column | tuple], values):
        cols = tuple(c if isinstance(c, Column) else Column(*c) for c in columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in {names}")
        for c in cols:
            if c.kind not in KINDS:
                raise SchemaError(f"column {c.name!r}: unknown kind {c.kind!r}")
        arr = np.array(values, dtype=float)
        if arr.ndim == 1 and len(cols) == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] != len(cols):
            raise SchemaError(
                f"value grid shape {arr.shape} does not match {len(cols)} columns"
            )
        if np.isinf(arr).any():
            raise ValueError("continuous cells must be finite when present")
        for j, c in enumerate(cols):
            if c.kind == BINARY:
                col = arr[:, j]
                present = col[~np.isnan(col)]
                if not np.isin(present, (0.0, 1.0)).all():
                    raise ValueError(f"binary column {c.name!r} holds non-0/1 values")
        arr.setflags(write=False)
        self.columns = cols
        self._values = arr
        self._index = {c.name: j for j, c in enumerate(cols)}

    @classmethod
    def from_columns(cls, data: Mapping[str, Sequence[float]], kinds: Mapping[str, str]):
        names = list(data)
        return cls([Column(k, kinds[k]) for k in names],
                   np.column_stack([np.asarray(data[k], dtype=float) for k in names]))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def n(self) -> int:
        return self._values.shape[0]

    def __len__(self):
        return self.n

    def kind(self, name: str) -> str:
        return self.columns[self._index[name]].kind

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no column named {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self._values[:, self.index(name)]

    def observed(self) -> np.ndarray:
        """Boolean n x p matrix, True where the cell is present."""
        return ~np.isnan(self._values)

    def complete_rows(self, names: Sequence[str] | None = None) -> np.ndarray:
        cols = slice(None) if names is None else [self.index(c) for c in names]
        return ~np.isnan(self._values[:, cols]).any(axis=1)

    def select(self, names: Sequence[str]) -> "Table":
        idx = [self.index(c) for c in names]
        return Table([self.columns[i] for i in idx], self._values[:, idx])

    def take(self, rows) -> "Table":
        return Table(self.columns, self._values[rows])

    def replace_values(self, values) -> "Table":
        return Table(self.columns, values)

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        return (self.columns == other.columns
                and self._values.shape == other._values.shape
                and np.array_equal(self._values, other._values, equal_nan=True))

    def __repr__(self):
        cols = ", ".join(f"{c.name}:{c.kind[0]}" for c in self.columns)
        return f"Table(n={self.n}, [{cols}])"


@dataclass(frozen=True)
class MissMask:
    """Per-cell observation indicators (True = observed)."""

    r: np.ndarray

    @property
    def row_observed(self) -> np.ndarray:
        """Blockwise indicator R_i: 1 iff every cell of the row is observed."""
        return self.r.all(axis=1)

    @classmethod
    def of(cls, table: Table) -> "MissMask":
        return cls(table.observed())


@dataclass(frozen=True)
class LinearRate:
    """Missingness probability ``a * x + b * (1 - x)`` for a binary driver."""

    a: float
    b: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.a * x + self.b * (1.0 - x)


@dataclass(frozen=True)
class ConstantRate:
    rate: float

    def __call__(self, x):
        return np.full(np.shape(x), float(self.rate))


@dataclass(frozen=True)
class LogisticRate:
    """Missingness probability ``expit(intercept + slope * x)``."""

    intercept: float
    slope: float

    def __call__(self, x):
        return expit(self.intercept + self.slope * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class MechanismSpec:
    """How missingness probabilities are generated.

    ``driver`` names the conditioning column for MAR.  For NMAR the
    probability is driven by the pre-deletion value of the first target
    column, so ``driver`` is ignored.  MCAR evaluates ``prob_fn`` on zeros.
    """

    kind: str
    prob_fn: Callable[[np.ndarray], np.ndarray]
    driver: str | None = None

    def __post_init__(self):
        if self.kind not in ("MCAR", "MAR", "NMAR"):
            raise ValueError(f"unknown mechanism {self.kind!r}")
        if self.kind == "MAR" and self.driver is None:
            raise ValueError("MAR mechanism needs a driver column")

    @classmethod
    def mcar(cls, rate: float) -> "MechanismSpec":
        return cls("MCAR", ConstantRate(rate))

    @classmethod
    def mar(cls, driver: str, prob_fn) -> "MechanismSpec":
        return cls("MAR", prob_fn, driver)

    @classmethod
    def nmar(cls, intercept: float, slope: float) -> "MechanismSpec":
        return cls("NMAR", LogisticRate(intercept, slope))

    def probabilities(self, table: Table, targets: Sequence[str]) -> np.ndarray:
        if self.kind == "MCAR":
            x = np.zeros(table.n)
        elif self.kind == "MAR":
            x = table.column(self.driver)
        else:
            x = table.column(targets[0])
        p = np.asarray(self.prob_fn(x), dtype=float)
        if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
            raise ValueError("missingness probabilities must lie in [0, 1]")
        return p


def inject_missing(table: Table, mech: MechanismSpec, targets: Sequence[str], seed,
                   *, blockwise: bool = True) -> tuple[Table, MissMask]:
    """Delete target cells according to ``mech``.

    With ``blockwise=True`` (the default) all target cells of a row are
    deleted jointly with the row's probability; otherwise each target cell
    gets an independent draw (used for NMAR stress tests).
    """
    targets = list(targets)
    if mech.kind == "MAR":
        if mech.driver in targets:
            raise ValueError("target columns must not include the driver")
        if np.isnan(table.column(mech.driver)).any():
            raise ValueError(f"driver column {mech.driver!r} must be fully observed")
    if mech.kind == "NMAR" and np.isnan(table.column(targets[0])).any():
        raise ValueError("NMAR driver column must be observed before deletion")
    rng = np.random.default_rng(seed)
    p = mech.probabilities(table, targets)
    idx = [table.index(c) for c in targets]
    values = table.values.copy()
    if blockwise:
        drop = rng.random(table.n) < p
        values[np.ix_(drop, idx)] = np.nan
    else:
        drop = rng.random((table.n, len(idx))) < p[:, None]
        sub = values[:, idx]
        sub[drop] = np.nan
        values[:, idx] = sub
    out = table.replace_values(values)
    return out, MissMask.of(out)


@dataclass(frozen=True)
class Pattern:
    """Missing-data pattern class; ``drivers`` are the always-observed columns."""

    kind: str
    drivers: tuple[str, ...] = ()

    def __str__(self):
        if self.kind == "blockwise":
            return f"blockwise({', '.join(self.drivers)})"
        return self.kind


def pattern_of(table: Table) -> Pattern:
    obs = table.observed()
    if obs.all():
        return Pattern("complete")
    always = obs.all(axis=0)
    if not always.any():
        return Pattern("general")
    incomplete = ~obs.all(axis=1)
    # each incomplete row must miss exactly the non-always-observed columns
    if np.all(obs[incomplete] == always):
        drivers = tuple(c.name for c, a in zip(table.columns, always) if a)
        return Pattern("blockwise", drivers)
    return Pattern("general")


def _format_cell(value: float, kind: str) -> str:
    if np.isnan(value):
        return MISSING_TOKEN
    if kind == BINARY:
        return str(int(value))
    return repr(float(value))


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.names)
    kinds = [c.kind for c in table.columns]
    for row in table.values:
        writer.writerow([_format_cell(v, k) for v, k in zip(row, kinds)])
    return buf.getvalue()


def write_csv(table: Table, path) -> None:
    Path(path).write_text(table_to_csv(table), encoding="utf-8")


def _parse_cell(token: str, kind: str, row: int, name: str) -> float:
    token = token.strip()
    if token == MISSING_TOKEN:
        return np.nan
    if kind == BINARY:
        if token == "0":
            return 0.0
        if token == "1":
            return 1.0
        raise ParseError(
            f"row {row}, column {name!r}: binary cell must be 0, 1 or NA, got {token!r}",
            row=row, column=name)
    try:
        value = float(token)
    except ValueError:
        value = np.nan
    if not np.isfinite(value):
        raise ParseError(
            f"row {row}, column {name!r}: cannot parse {token!r} as a finite number",
            row=row, column=name)
    return value


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except FileNotFoundError:
        raise SchemaError(f"{path}: file not found") from None


def load_csv(path, schema: Mapping[str, str] | Sequence[tuple[str, str]]) -> Table:
    """Read a comma-separated file with a header row; ``NA`` marks missing.

    ``schema`` maps column names to kinds, in file order.  Row numbers in
    errors count data rows from 1 (the header is row 0).
    """
    schema = dict(schema)
    rows = _read_rows(path)
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header != list(schema):
        raise SchemaError(f"{path}: header {header} does not match schema {list(schema)}")
    kinds = list(schema.values())
    values = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} fields, got {len(row)}", row=i)
        for j, (tok, kind) in enumerate(zip(row, kinds)):
            values[i - 1, j] = _parse_cell(tok, kind, i, header[j])
    return Table([Column(n, k) for n, k in schema.items()], values)


def infer_schema(path) -> dict[str, str]:
    """Guess column kinds: a column whose present cells are all 0/1 is binary."""
    rows = _read_rows(path)
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    schema = {}
    for j, name in enumerate(header):
        tokens = {r[j].strip() for r in rows[1:] if j < len(r)} - {MISSING_TOKEN}
        schema[name] = BINARY if tokens <= {"0", "1"} else CONTINUOUS
    return schema
