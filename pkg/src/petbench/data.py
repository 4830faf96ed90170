"""Tabular data plumbing: typed tables, attribute schemas, CSV loading,
feature encoding and train/test splitting.

Tables are column-ordered and immutable from the outside.  Numeric columns
are stored as float64, categorical columns as fixed-width text arrays so
that comparisons and uniquing stay vectorized.  The missing marker is the
literal ``"?"`` in categorical columns and NaN in numeric ones; rows
containing a missing marker are dropped at encoding time and the drop
count is reported.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

MISSING = "?"

_DELIMITERS = {"comma": ",", "semicolon": ";"}


class Role(str, enum.Enum):
    """What an attribute reveals about the subject of a record."""

    INSENSITIVE = "insensitive"
    SENSITIVE = "sensitive"
    IDENTIFYING = "identifying"
    QUASI_IDENTIFYING = "quasi_identifying"


class Kind(str, enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


class RaggedRowError(ValueError):
    """A CSV row whose field count differs from the header's."""

    def __init__(self, line: int, expected: int, got: int):
        self.line = line
        self.expected = expected
        self.got = got
        super().__init__(f"line {line}: expected {expected} fields, got {got}")


class ParseError(ValueError):
    """A cell in a numeric column that is neither a number nor the missing marker."""

    def __init__(self, line: int, column: str, value: str):
        self.line = line
        self.column = column
        self.value = value
        super().__init__(f"line {line}, column {column!r}: cannot parse {value!r} as numeric")


class MissingTargetError(ValueError):
    """The schema declares no target column but one is required."""


class UnknownColumnError(ValueError):
    """A schema or caller referenced a column the table does not have."""


class SchemaMismatchError(ValueError):
    """Two tables that should share a schema do not."""


def _as_column(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError("columns must be one-dimensional")
    if arr.dtype.kind in "fiub":
        return arr.astype(np.float64)
    if arr.dtype.kind == "U":
        return arr
    # mixed/object input: stringify into a fixed-width text array
    return np.array([str(v) for v in arr], dtype="U")


class DataTable:
    """An ordered collection of equal-length named columns.

    Construct from ``(name, values)`` pairs; numeric input becomes float64,
    anything else becomes interned text.  Infinite numeric cells are
    rejected (NaN is allowed only as the numeric missing marker).
    """

    __slots__ = ("_names", "_cols")

    def __init__(self, columns: Sequence[tuple[str, Sequence]] | Iterable[tuple[str, Sequence]]):
        names: list[str] = []
        cols: dict[str, np.ndarray] = {}
        n_rows = None
        for name, values in columns:
            if not name:
                raise ValueError("column names must be non-empty")
            if name in cols:
                raise ValueError(f"duplicate column name {name!r}")
            arr = _as_column(values)
            if n_rows is None:
                n_rows = arr.shape[0]
            elif arr.shape[0] != n_rows:
                raise ValueError(
                    f"column {name!r} has {arr.shape[0]} rows, expected {n_rows}"
                )
            if arr.dtype == np.float64 and np.isinf(arr).any():
                raise ValueError(f"column {name!r} contains non-finite values")
            names.append(name)
            cols[name] = arr
        self._names = tuple(names)
        self._cols = cols

    # -- basic introspection -------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def n_rows(self) -> int:
        if not self._names:
            return 0
        return self._cols[self._names[0]].shape[0]

    @property
    def n_cols(self) -> int:
        return len(self._names)

    def column(self, name: str) -> np.ndarray:
        try:
            return self._cols[name]
        except KeyError:
            raise UnknownColumnError(f"no column named {name!r}") from None

    def is_numeric(self, name: str) -> bool:
        return self.column(name).dtype == np.float64

    def row(self, i: int) -> tuple:
        return tuple(self._cols[name][i] for name in self._names)

    # -- derived tables ------------------------------------------------------

    def select(self, names: Sequence[str]) -> "DataTable":
        return DataTable([(n, self.column(n)) for n in names])

    def drop(self, names: Sequence[str]) -> "DataTable":
        dropped = set(names)
        for n in dropped:
            self.column(n)  # raises UnknownColumnError for typos
        return DataTable([(n, self._cols[n]) for n in self._names if n not in dropped])

    def take(self, indices) -> "DataTable":
        idx = np.asarray(indices)
        return DataTable([(n, self._cols[n][idx]) for n in self._names])

    def with_columns(self, replacements: Mapping[str, Sequence]) -> "DataTable":
        """Replace existing columns by name, preserving column order."""
        for n in replacements:
            self.column(n)
        return DataTable(
            [(n, replacements[n] if n in replacements else self._cols[n]) for n in self._names]
        )

    # -- missing values ------------------------------------------------------

    def column_missing_mask(self, name: str) -> np.ndarray:
        col = self.column(name)
        if col.dtype == np.float64:
            return np.isnan(col)
        return np.asarray(col == MISSING, dtype=bool)

    def missing_row_mask(self, names: Sequence[str] | None = None) -> np.ndarray:
        """True where any of the given columns (default: all) holds a missing marker."""
        names = self._names if names is None else tuple(names)
        mask = np.zeros(self.n_rows, dtype=bool)
        for n in names:
            mask |= self.column_missing_mask(n)
        return mask

    # -- equality / repr -----------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataTable):
            return NotImplemented
        if self._names != other._names or self.n_rows != other.n_rows:
            return False
        for n in self._names:
            a, b = self._cols[n], other._cols[n]
            if (a.dtype == np.float64) != (b.dtype == np.float64):
                return False
            if a.dtype == np.float64:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif not np.array_equal(a, b):  # text widths may differ; compare content
                return False
        return True

    def __repr__(self) -> str:
        return f"DataTable({self.n_rows} rows x {self.n_cols} cols)"


# -- schemas ------------------------------------------------------------------


@dataclass(frozen=True)
class TargetRule:
    """How the target column maps to a binary label.

    Exactly one of ``positive_value`` (categorical: label 1 iff equal) and
    ``threshold`` (numeric: label 1 iff value >= threshold) is set.
    """

    column: str
    positive_value: str | None = None
    threshold: float | None = None

    def __post_init__(self):
        if (self.positive_value is None) == (self.threshold is None):
            raise ValueError("exactly one of positive_value / threshold must be set")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: Kind
    role: Role
    target: bool = False
    positive_value: str | None = None
    threshold: float | None = None


_ROLE_ALIASES = {
    "insensitive": Role.INSENSITIVE,
    "sensitive": Role.SENSITIVE,
    "identifying": Role.IDENTIFYING,
    "quasi_identifying": Role.QUASI_IDENTIFYING,
    "quasi-identifying": Role.QUASI_IDENTIFYING,
    "quasi": Role.QUASI_IDENTIFYING,
}


class AttributeSchema:
    """Per-column kinds, roles, and the (at most one) target declaration."""

    def __init__(self, columns: Sequence[ColumnSpec]):
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise ValueError("schema column names must be unique")
        targets = [c for c in columns if c.target]
        if len(targets) > 1:
            raise ValueError("at most one target column is allowed")
        self._columns = tuple(columns)
        self._by_name = {c.name: c for c in columns}

    @property
    def columns(self) -> tuple[ColumnSpec, ...]:
        return self._columns

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self._columns)

    def __getitem__(self, name: str) -> ColumnSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownColumnError(f"schema has no column {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def target(self) -> ColumnSpec | None:
        for c in self._columns:
            if c.target:
                return c
        return None

    @property
    def target_rule(self) -> TargetRule:
        col = self.target
        if col is None:
            raise MissingTargetError("schema declares no target column")
        return TargetRule(col.name, positive_value=col.positive_value, threshold=col.threshold)

    def with_role(self, role: Role) -> tuple[str, ...]:
        return tuple(c.name for c in self._columns if c.role is role)

    @property
    def quasi_identifiers(self) -> tuple[str, ...]:
        return self.with_role(Role.QUASI_IDENTIFYING)

    @property
    def identifying(self) -> tuple[str, ...]:
        return self.with_role(Role.IDENTIFYING)

    def drop(self, names: Sequence[str]) -> "AttributeSchema":
        gone = set(names)
        return AttributeSchema([c for c in self._columns if c.name not in gone])

    def with_kind(self, name: str, kind: Kind) -> "AttributeSchema":
        self[name]
        return AttributeSchema(
            [
                ColumnSpec(c.name, kind, c.role, c.target, c.positive_value, c.threshold)
                if c.name == name
                else c
                for c in self._columns
            ]
        )

    # -- JSON round trip -----------------------------------------------------

    def to_json(self) -> str:
        entries = []
        for c in self._columns:
            entry: dict = {"name": c.name, "kind": c.kind.value, "role": c.role.value}
            if c.target:
                entry["target"] = True
                if c.threshold is not None:
                    entry["pass_threshold"] = c.threshold
                if c.positive_value is not None:
                    entry["positive_value"] = c.positive_value
            entries.append(entry)
        return json.dumps({"columns": entries}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AttributeSchema":
        entries = json.loads(text)
        if isinstance(entries, Mapping):
            entries = entries["columns"]
        columns = []
        for e in entries:
            role = _ROLE_ALIASES.get(str(e["role"]).lower())
            if role is None:
                raise ValueError(f"unknown role {e['role']!r} for column {e['name']!r}")
            columns.append(
                ColumnSpec(
                    name=e["name"],
                    kind=Kind(e["kind"]),
                    role=role,
                    target=bool(e.get("target", False)),
                    positive_value=e.get("positive_value"),
                    threshold=e.get("pass_threshold"),
                )
            )
        return cls(columns)

    @classmethod
    def from_json_file(cls, path) -> "AttributeSchema":
        return cls.from_json(Path(path).read_text())


# -- CSV loading ---------------------------------------------------------------


def load_csv(
    path,
    *,
    dialect: str = "comma",
    header: bool = True,
    schema: AttributeSchema | None = None,
    column_names: Sequence[str] | None = None,
) -> DataTable:
    """Load a delimited text file into a :class:`DataTable`.

    ``dialect`` is ``"comma"`` or ``"semicolon"``.  Cells are stripped of
    surrounding whitespace and quotes.  When a schema is given its kinds are
    enforced (a numeric cell that fails to parse raises :class:`ParseError`);
    otherwise a column is numeric iff every non-missing cell parses as a
    number.  The marker ``"?"`` always stays a missing marker.
    """
    if dialect not in _DELIMITERS:
        raise ValueError(f"unknown dialect {dialect!r}; expected one of {sorted(_DELIMITERS)}")
    delim = _DELIMITERS[dialect]

    rows: list[list[str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delim, quotechar='"', skipinitialspace=True)
        for raw in reader:
            if not raw or (len(raw) == 1 and raw[0].strip() == ""):
                continue  # blank line
            rows.append([cell.strip() for cell in raw])

    if not rows:
        if header:
            raise ValueError(f"{path}: no header row")
        if column_names is None:
            raise ValueError(f"{path}: empty file and no column names given")
        return DataTable([(n, np.empty(0, dtype="U1")) for n in column_names])

    if header:
        names = rows[0]
        body = rows[1:]
        first_line = 2
    else:
        if column_names is None:
            raise ValueError("header=False requires column_names")
        names = list(column_names)
        body = rows
        first_line = 1
    if len(set(names)) != len(names):
        raise ValueError("duplicate column names in header")

    width = len(names)
    for offset, row in enumerate(body):
        if len(row) != width:
            raise RaggedRowError(first_line + offset, width, len(row))

    if schema is not None:
        for spec in schema.columns:
            if spec.name not in names:
                raise UnknownColumnError(f"schema column {spec.name!r} not in file")

    columns: list[tuple[str, np.ndarray]] = []
    for j, name in enumerate(names):
        cells = [row[j] for row in body]
        kind = None
        if schema is not None and name in schema:
            kind = schema[name].kind
        columns.append((name, _parse_column(name, cells, kind, first_line)))
    return DataTable(columns)


def _parse_column(name: str, cells: list[str], kind: Kind | None, first_line: int) -> np.ndarray:
    if kind is Kind.CATEGORICAL:
        return _text_column(cells)
    values = np.empty(len(cells), dtype=np.float64)
    for i, cell in enumerate(cells):
        if cell == MISSING or cell == "":
            values[i] = np.nan
            continue
        try:
            values[i] = float(cell)
        except ValueError:
            if kind is Kind.NUMERIC:
                raise ParseError(first_line + i, name, cell) from None
            return _text_column(cells)  # inferred: not numeric after all
    if kind is None and all(c == MISSING or c == "" for c in cells):
        return _text_column(cells)
    return values


def _text_column(cells: list[str]) -> np.ndarray:
    return np.array(cells, dtype="U") if cells else np.empty(0, dtype="U1")


def write_csv(table: DataTable, path, *, dialect: str = "comma") -> None:
    """Write a table back out; numeric NaN becomes the "?" missing marker."""
    delim = _DELIMITERS[dialect]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delim)
        writer.writerow(table.names)
        cols = [table.column(n) for n in table.names]
        numeric = [c.dtype == np.float64 for c in cols]
        for i in range(table.n_rows):
            row = []
            for c, is_num in zip(cols, numeric):
                v = c[i]
                if is_num:
                    row.append(MISSING if np.isnan(v) else format(v, "g"))
                else:
                    row.append(v)
            writer.writerow(row)


# -- labels ---------------------------------------------------------------------


def binarize_target(table: DataTable, rule: TargetRule) -> np.ndarray:
    """Map the target column to int64 labels in {0, 1}."""
    if rule.column not in table.names:
        raise MissingTargetError(f"table has no target column {rule.column!r}")
    col = table.column(rule.column)
    if rule.threshold is not None:
        if col.dtype != np.float64:
            raise ValueError(f"threshold rule on non-numeric column {rule.column!r}")
        with np.errstate(invalid="ignore"):
            return (col >= rule.threshold).astype(np.int64)
    if col.dtype == np.float64:
        raise ValueError(f"positive-value rule on numeric column {rule.column!r}")
    return (col == rule.positive_value).astype(np.int64)


# -- feature encoding ------------------------------------------------------------


@dataclass
class EncodedMatrix:
    """A model-ready design matrix plus its binary label vector."""

    matrix: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    dropped_rows: int = 0


@dataclass
class _ColumnCodec:
    name: str
    numeric: bool
    categories: tuple[str, ...] = ()
    lo: float = 0.0
    hi: float = 0.0


class Encoder:
    """One-hot (categorical) and min-max (numeric) feature encoder.

    Fit on one table, then applied to tables with the same columns.  Scaling
    parameters and category lists come from the fitted table; categories
    unseen at fit time transform to all-zero indicator groups.  Feature
    columns are the schema's non-target columns, in schema order.
    """

    def __init__(self, schema: AttributeSchema):
        if schema.target is None:
            raise MissingTargetError("encoding requires a schema with a target column")
        self._schema = schema
        self._codecs: list[_ColumnCodec] | None = None

    @property
    def feature_names(self) -> tuple[str, ...]:
        self._require_fit()
        names: list[str] = []
        for codec in self._codecs:
            if codec.numeric:
                names.append(codec.name)
            else:
                names.extend(f"{codec.name}={c}" for c in codec.categories)
        return tuple(names)

    def fit(self, table: DataTable) -> "Encoder":
        codecs = []
        keep = ~table.missing_row_mask(self._feature_and_target_names(table))
        for spec in self._schema.columns:
            if spec.target:
                continue
            col = table.column(spec.name)[keep]
            if table.is_numeric(spec.name):
                lo = float(col.min()) if col.size else 0.0
                hi = float(col.max()) if col.size else 0.0
                codecs.append(_ColumnCodec(spec.name, True, lo=lo, hi=hi))
            else:
                cats = np.unique(col) if col.size else ()
                codecs.append(_ColumnCodec(spec.name, False, categories=tuple(str(c) for c in cats)))
        self._codecs = codecs
        return self

    def transform(self, table: DataTable) -> EncodedMatrix:
        self._require_fit()
        names = self._feature_and_target_names(table)
        keep = ~table.missing_row_mask(names)
        dropped = int(table.n_rows - keep.sum())
        blocks: list[np.ndarray] = []
        for codec in self._codecs:
            col = table.column(codec.name)[keep]
            if codec.numeric:
                if col.dtype != np.float64:
                    raise SchemaMismatchError(
                        f"column {codec.name!r} was numeric at fit time but is not now"
                    )
                span = codec.hi - codec.lo
                if span == 0.0:
                    block = np.zeros((col.shape[0], 1))
                else:
                    block = ((col - codec.lo) / span).reshape(-1, 1)
                blocks.append(block)
            else:
                # one comparison pass per category; rows with unseen values
                # are left all-zero
                block = np.zeros((col.shape[0], len(codec.categories)))
                for j, cat in enumerate(codec.categories):
                    block[:, j] = col == cat
                blocks.append(block)
        n = int(keep.sum())
        matrix = np.hstack(blocks) if blocks else np.zeros((n, 0))
        labels = binarize_target(table.take(np.flatnonzero(keep)), self._schema.target_rule)
        return EncodedMatrix(matrix, self.feature_names, labels, dropped)

    def decode_categorical(self, matrix: np.ndarray, name: str) -> list[str]:
        """Invert one-hot encoding for one categorical column (argmax per row)."""
        self._require_fit()
        start = 0
        for codec in self._codecs:
            width = 1 if codec.numeric else len(codec.categories)
            if codec.name == name:
                if codec.numeric:
                    raise ValueError(f"column {name!r} is numeric")
                block = matrix[:, start : start + width]
                return [codec.categories[int(k)] for k in block.argmax(axis=1)]
            start += width
        raise UnknownColumnError(f"encoder has no column {name!r}")

    def _feature_and_target_names(self, table: DataTable) -> tuple[str, ...]:
        names = []
        for spec in self._schema.columns:
            if spec.name not in table.names:
                raise UnknownColumnError(f"table has no column {spec.name!r}")
            names.append(spec.name)
        return tuple(names)

    def _require_fit(self):
        if self._codecs is None:
            raise RuntimeError("encoder is not fitted")


def encode(table: DataTable, schema: AttributeSchema) -> EncodedMatrix:
    """Fit-and-transform convenience wrapper around :class:`Encoder`."""
    return Encoder(schema).fit(table).transform(table)


# -- splitting -------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    fraction: float = 2.0 / 3.0
    seed: int = 42

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must be within [0, 1], got {self.fraction}")


def split(table: DataTable, spec: SplitSpec = SplitSpec()) -> tuple[DataTable, DataTable]:
    """Shuffle rows with the spec's seed and cut into (train, test).

    The train size is round(fraction * rows) with halves rounded up, so the
    two parts always partition the input rows exactly.
    """
    n = table.n_rows
    n_train = int(np.floor(spec.fraction * n + 0.5))
    perm = np.random.default_rng(spec.seed).permutation(n)
    return table.take(perm[:n_train]), table.take(perm[n_train:])
