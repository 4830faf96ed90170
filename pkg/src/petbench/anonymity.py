"""k-anonymity through full-domain generalization and record suppression.

A generalization hierarchy rewrites one attribute at a chosen coarseness
level: level 0 is the identity, the top level maps every value to an
all-asterisk suppression root.  Anonymization walks a greedy search over
per-attribute levels until every equivalence class induced by the
quasi-identifying attributes reaches the requested size, suppressing the
remaining violating records if they fit the caller's budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import (
    MISSING,
    AttributeSchema,
    DataTable,
    Kind,
    UnknownColumnError,
)


class InvalidWidthsError(ValueError):
    """Bin widths that cannot form a nested hierarchy."""


class InvalidKError(ValueError):
    """Requested group size is impossible for the table."""


class BudgetExceededError(ValueError):
    """Suppressing the violating records would exceed the allowed fraction."""

    def __init__(self, needed: float, budget: float):
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"suppressing violating records needs {needed:.4f} of the table, "
            f"budget is {budget:.4f}"
        )


class MissingHierarchyError(ValueError):
    """A quasi-identifying attribute has no generalization hierarchy."""

    def __init__(self, attribute: str):
        self.attribute = attribute
        super().__init__(f"no hierarchy for quasi-identifying attribute {attribute!r}")


def _format_number(x: float) -> str:
    return format(x, "g")


class Hierarchy:
    """Base class: ordered generalization levels 0..num_levels."""

    #: index of the top (full suppression) level
    num_levels: int = 0
    #: the all-asterisk label everything maps to at the top level
    root: str = "*"

    def apply(self, values: np.ndarray, level: int) -> np.ndarray:
        """Return the column rewritten at ``level``; level 0 is the identity.

        Missing markers survive generalization unchanged so that downstream
        row dropping still sees them.
        """
        self._check_level(level)
        if level == 0:
            return values
        return self._apply(values, level)

    def _apply(self, values: np.ndarray, level: int) -> np.ndarray:
        raise NotImplementedError

    def _check_level(self, level: int) -> None:
        if not 0 <= level <= self.num_levels:
            raise ValueError(f"level {level} outside [0, {self.num_levels}]")


class NumericBinHierarchy(Hierarchy):
    """Numeric values fall into half-open bins of increasing width.

    Each width must be an integer multiple of the one before it (and all
    bins share one anchor), otherwise a coarser level would split a finer
    bin instead of merging bins.
    """

    def __init__(self, lo: float, hi: float, widths: Sequence[float], anchor: float = 0.0):
        widths = tuple(float(w) for w in widths)
        if not widths:
            raise InvalidWidthsError("at least one bin width is required")
        if any(w <= 0 for w in widths):
            raise InvalidWidthsError(f"widths must be positive, got {widths}")
        if any(b <= a for a, b in zip(widths, widths[1:])):
            raise InvalidWidthsError(f"widths must be strictly ascending, got {widths}")
        for a, b in zip(widths, widths[1:]):
            if abs(b / a - round(b / a)) > 1e-9:
                raise InvalidWidthsError(
                    f"width {b:g} is not a multiple of {a:g}; levels would not nest"
                )
        self.lo = float(lo)
        self.hi = float(hi)
        self.widths = widths
        self.anchor = float(anchor)
        self.num_levels = len(widths) + 1

    def _apply(self, values: np.ndarray, level: int) -> np.ndarray:
        out = np.empty(values.shape[0], dtype=object)
        if level == self.num_levels:
            out[:] = self.root
            if values.dtype == np.float64:
                out[np.isnan(values)] = MISSING
            else:
                for i, v in enumerate(values):
                    if v == MISSING:
                        out[i] = MISSING
            return out
        width = self.widths[level - 1]
        if values.dtype != np.float64:
            raise ValueError("numeric hierarchy applied to a non-numeric column")
        for i, v in enumerate(values):
            if math.isnan(v):
                out[i] = MISSING
                continue
            lo = math.floor((v - self.anchor) / width) * width + self.anchor
            out[i] = f"[{_format_number(lo)}–{_format_number(lo + width)})"
        return out

    def __repr__(self):
        return f"NumericBinHierarchy(widths={list(self.widths)}, anchor={self.anchor:g})"


class SuffixMaskHierarchy(Hierarchy):
    """Token generalization by masking trailing characters with asterisks."""

    def __init__(self, token_length: int):
        if token_length < 1:
            raise ValueError("token_length must be at least 1")
        self.token_length = int(token_length)
        self.num_levels = self.token_length
        self.root = "*" * self.token_length

    def _apply(self, values: np.ndarray, level: int) -> np.ndarray:
        out = np.empty(values.shape[0], dtype=object)
        for i, v in enumerate(values):
            text = str(v)
            if text == MISSING:
                out[i] = MISSING
            elif level == self.num_levels:
                out[i] = self.root
            else:
                keep = max(0, len(text) - level)
                out[i] = text[:keep] + "*" * (len(text) - keep)
        return out

    def __repr__(self):
        return f"SuffixMaskHierarchy(token_length={self.token_length})"


class TaxonomyHierarchy(Hierarchy):
    """Explicit value-to-parent maps, one per intermediate level.

    ``levels[i]`` maps a raw value directly to its label at level ``i + 1``.
    With no intermediate maps this is the two-level observed-value ladder
    (identity, then the suppression root).  Values absent from a map pass
    through unchanged.
    """

    def __init__(self, levels: Sequence[Mapping[str, str]] = ()):
        self.levels = tuple(dict(m) for m in levels)
        self.num_levels = len(self.levels) + 1

    def _apply(self, values: np.ndarray, level: int) -> np.ndarray:
        out = np.empty(values.shape[0], dtype=object)
        if level == self.num_levels:
            for i, v in enumerate(values):
                out[i] = MISSING if v == MISSING else self.root
            return out
        table = self.levels[level - 1]
        for i, v in enumerate(values):
            out[i] = MISSING if v == MISSING else table.get(v, v)
        return out

    def __repr__(self):
        return f"TaxonomyHierarchy(levels={len(self.levels)})"


def build_numeric_hierarchy(
    lo: float, hi: float, widths: Sequence[float], anchor: float = 0.0
) -> NumericBinHierarchy:
    return NumericBinHierarchy(lo, hi, widths, anchor)


def build_suffix_hierarchy(token_length: int) -> SuffixMaskHierarchy:
    return SuffixMaskHierarchy(token_length)


# -- hierarchy config files -----------------------------------------------------


def hierarchies_from_config(config: Mapping[str, Mapping]) -> dict[str, Hierarchy]:
    """Build an attribute -> hierarchy mapping from parsed JSON config."""
    out: dict[str, Hierarchy] = {}
    for attribute, entry in config.items():
        kind = entry.get("type")
        if kind == "numeric_bins":
            out[attribute] = NumericBinHierarchy(
                entry.get("min", 0.0),
                entry.get("max", 0.0),
                entry["widths"],
                entry.get("anchor", 0.0),
            )
        elif kind == "suffix_mask":
            out[attribute] = SuffixMaskHierarchy(entry["token_length"])
        elif kind == "taxonomy":
            out[attribute] = TaxonomyHierarchy(entry.get("levels", []))
        else:
            raise ValueError(f"unknown hierarchy type {kind!r} for attribute {attribute!r}")
    return out


def hierarchies_from_json_file(path) -> dict[str, Hierarchy]:
    return hierarchies_from_config(json.loads(Path(path).read_text(encoding="utf-8")))


def hierarchies_to_config(hierarchies: Mapping[str, Hierarchy]) -> dict:
    out: dict = {}
    for attribute, h in hierarchies.items():
        if isinstance(h, NumericBinHierarchy):
            out[attribute] = {
                "type": "numeric_bins",
                "min": h.lo,
                "max": h.hi,
                "widths": list(h.widths),
                "anchor": h.anchor,
            }
        elif isinstance(h, SuffixMaskHierarchy):
            out[attribute] = {"type": "suffix_mask", "token_length": h.token_length}
        elif isinstance(h, TaxonomyHierarchy):
            out[attribute] = {"type": "taxonomy", "levels": [dict(m) for m in h.levels]}
        else:
            raise TypeError(f"cannot serialize hierarchy {h!r}")
    return out


# -- generalization state ---------------------------------------------------------


class GeneralizationState:
    """Immutable map from quasi-identifying attribute to its current level."""

    __slots__ = ("_levels",)

    def __init__(self, levels: Mapping[str, int] | None = None):
        self._levels = {k: int(v) for k, v in (levels or {}).items() if int(v) != 0}

    def level(self, attribute: str) -> int:
        return self._levels.get(attribute, 0)

    def with_level(self, attribute: str, level: int) -> "GeneralizationState":
        merged = dict(self._levels)
        merged[attribute] = level
        return GeneralizationState(merged)

    def as_dict(self) -> dict[str, int]:
        return dict(sorted(self._levels.items()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, GeneralizationState):
            return NotImplemented
        return self._levels == other._levels

    def __repr__(self):
        return f"GeneralizationState({self.as_dict()})"


IDENTITY_STATE = GeneralizationState()


@dataclass(frozen=True)
class EquivalenceClass:
    """Rows indistinguishable on the generalized quasi-identifiers."""

    key: tuple
    rows: np.ndarray

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])


@dataclass(frozen=True)
class AnonymizationReport:
    requested_k: int
    min_class_size: int
    state: GeneralizationState
    suppressed_records: int
    suppressed_cell_fraction: float
    identifying_removed: tuple[str, ...]


# -- partitioning ------------------------------------------------------------------


def _column_codes(values: np.ndarray) -> np.ndarray:
    """Integer codes for grouping; numeric NaN groups as one missing code."""
    if values.dtype == np.float64:
        nan = np.isnan(values)
        uniq = np.unique(values[~nan])
        codes = np.searchsorted(uniq, values)
        codes[nan] = -1
        return codes.astype(np.int64)
    index: dict = {}
    codes = np.empty(values.shape[0], dtype=np.int64)
    for i, v in enumerate(values):
        code = index.get(v)
        if code is None:
            code = len(index)
            index[v] = code
        codes[i] = code
    return codes


def _qi_code_table(
    table: DataTable,
    schema: AttributeSchema,
    hierarchies: Mapping[str, Hierarchy],
) -> "_CodeTable":
    attrs = schema.quasi_identifiers
    for attr in attrs:
        if attr not in table.names:
            raise UnknownColumnError(f"quasi-identifying column {attr!r} not in table")
        if attr not in hierarchies:
            raise MissingHierarchyError(attr)
    return _CodeTable(table, attrs, hierarchies)


class _CodeTable:
    """Lazily computed per-(attribute, level) grouping codes for one table."""

    def __init__(self, table, attrs, hierarchies):
        self.table = table
        self.attrs = tuple(attrs)
        self.hierarchies = hierarchies
        self._codes: dict[tuple[str, int], np.ndarray] = {}

    def codes(self, attr: str, level: int) -> np.ndarray:
        key = (attr, level)
        if key not in self._codes:
            generalized = self.hierarchies[attr].apply(self.table.column(attr), level)
            self._codes[key] = _column_codes(generalized)
        return self._codes[key]

    def class_sizes(self, state: GeneralizationState) -> tuple[np.ndarray, np.ndarray]:
        """Return (inverse class ids per row, class sizes)."""
        n = self.table.n_rows
        if not self.attrs:
            return np.zeros(n, dtype=np.int64), np.array([n])
        stacked = np.column_stack([self.codes(a, state.level(a)) for a in self.attrs])
        _, inverse, counts = np.unique(
            stacked, axis=0, return_inverse=True, return_counts=True
        )
        return inverse.ravel(), counts

    def violating_rows(self, state: GeneralizationState, k: int) -> int:
        inverse, counts = self.class_sizes(state)
        return int(counts[counts < k].sum())


def partition_classes(
    table: DataTable,
    state: GeneralizationState,
    schema: AttributeSchema,
    hierarchies: Mapping[str, Hierarchy],
) -> list[EquivalenceClass]:
    """Group rows into equivalence classes on the generalized quasi-identifiers.

    Classes come back ordered by their first member row.  A table without
    quasi-identifying attributes forms a single class.
    """
    if table.n_rows == 0:
        raise ValueError("cannot partition an empty table")
    code_table = _qi_code_table(table, schema, hierarchies)
    inverse, counts = code_table.class_sizes(state)
    order = np.argsort(inverse, kind="stable")
    boundaries = np.cumsum(counts)[:-1]
    groups = np.split(order, boundaries)
    attrs = code_table.attrs
    generalized = {
        a: (
            hierarchies[a].apply(table.column(a), state.level(a))
            if state.level(a) > 0
            else table.column(a)
        )
        for a in attrs
    }
    classes = [
        EquivalenceClass(
            key=tuple(generalized[a][rows[0]] for a in attrs),
            rows=np.sort(rows),
        )
        for rows in groups
    ]
    classes.sort(key=lambda c: int(c.rows[0]))
    return classes


def verify_k(
    table: DataTable,
    state: GeneralizationState,
    schema: AttributeSchema,
    k: int,
    hierarchies: Mapping[str, Hierarchy],
) -> tuple[bool, int]:
    """Check the k-anonymity guarantee; returns (holds, smallest class size)."""
    if table.n_rows == 0:
        raise ValueError("cannot verify an empty table")
    code_table = _qi_code_table(table, schema, hierarchies)
    _, counts = code_table.class_sizes(state)
    smallest = int(counts.min())
    return smallest >= k, smallest


def apply_state(
    table: DataTable,
    state: GeneralizationState,
    schema: AttributeSchema,
    hierarchies: Mapping[str, Hierarchy],
) -> DataTable:
    """Rewrite the quasi-identifying columns of a table at the state's levels."""
    replacements = {}
    for attr in schema.quasi_identifiers:
        if attr not in table.names:
            continue
        level = state.level(attr)
        if level == 0:
            continue
        if attr not in hierarchies:
            raise MissingHierarchyError(attr)
        replacements[attr] = hierarchies[attr].apply(table.column(attr), level)
    return table.with_columns(replacements) if replacements else table


# -- anonymization -----------------------------------------------------------------


def anonymize(
    table: DataTable,
    schema: AttributeSchema,
    hierarchies: Mapping[str, Hierarchy],
    k: int,
    max_record_suppression: float = 1.0,
    k_plus_one: bool = False,
) -> tuple[DataTable, AnonymizationReport]:
    """Generalize and suppress until every equivalence class has >= k rows.

    Identifying columns are removed outright.  The greedy loop raises the
    level of whichever quasi-identifying attribute removes the most rows
    from violating classes; ties — including the zero-reduction plateaus
    that raw high-cardinality data starts from — go to the attribute first
    in schema order, so the loop keeps climbing until the violations clear
    or every ladder is exhausted.  Whatever classes still violate at that
    point are suppressed whole if they fit within ``max_record_suppression``
    of the rows.  With ``k_plus_one`` the guarantee is class size >= k + 1,
    the strict "k other records" reading.
    """
    if k < 1:
        raise InvalidKError(f"k must be >= 1, got {k}")
    if k > table.n_rows:
        raise InvalidKError(f"k={k} exceeds the table's {table.n_rows} rows")
    if not 0.0 <= max_record_suppression <= 1.0:
        raise ValueError("max_record_suppression must be within [0, 1]")

    need = k + 1 if k_plus_one else k
    identifying = tuple(c for c in schema.identifying if c in table.names)
    work = table.drop(identifying) if identifying else table
    work_schema = schema.drop(identifying)

    code_table = _qi_code_table(work, work_schema, hierarchies)
    attrs = code_table.attrs
    state = GeneralizationState()
    violating = code_table.violating_rows(state, need)

    while violating > 0:
        best_attr = None
        best_violating = violating + 1
        for attr in attrs:
            if state.level(attr) >= hierarchies[attr].num_levels:
                continue
            candidate = state.with_level(attr, state.level(attr) + 1)
            cand_violating = code_table.violating_rows(candidate, need)
            # merging classes never shrinks one, so cand_violating <= violating;
            # a zero-reduction tie still advances the leftmost attribute
            if cand_violating < best_violating:
                best_attr = attr
                best_violating = cand_violating
        if best_attr is None:
            break
        state = state.with_level(best_attr, state.level(best_attr) + 1)
        violating = best_violating

    inverse, counts = code_table.class_sizes(state)
    keep_mask = counts[inverse] >= need
    suppressed = int(table.n_rows - keep_mask.sum())
    if violating > 0:
        fraction = suppressed / table.n_rows
        if fraction > max_record_suppression:
            raise BudgetExceededError(fraction, max_record_suppression)

    generalized = apply_state(work, state, work_schema, hierarchies)
    output = generalized.take(np.flatnonzero(keep_mask))
    min_size = int(counts[counts >= need].min()) if keep_mask.any() else 0

    report = AnonymizationReport(
        requested_k=k,
        min_class_size=min_size,
        state=state,
        suppressed_records=suppressed,
        suppressed_cell_fraction=0.0,
        identifying_removed=identifying,
    )
    report = replace(
        report, suppressed_cell_fraction=suppression_ratio(table, output, report)
    )
    return output, report


def suppression_ratio(
    original: DataTable, anonymized: DataTable, report: AnonymizationReport
) -> float:
    """Fraction of the original cells lost to suppression.

    Counts all-asterisk root cells in the anonymized table, every remaining
    cell of each suppressed record, and every cell of each removed
    identifying column, against rows x columns of the original.  Suppressed
    records are counted over the non-identifying columns only, so a fully
    suppressed table comes out at exactly 1.0.
    """
    total = original.n_rows * original.n_cols
    if total == 0:
        return 0.0
    root_cells = 0
    for name in anonymized.names:
        col = anonymized.column(name)
        if col.dtype == np.float64:
            continue
        for v in col:
            if v and set(v) == {"*"}:
                root_cells += 1
    removed = len(report.identifying_removed)
    record_cells = report.suppressed_records * (original.n_cols - removed)
    column_cells = removed * original.n_rows
    return (root_cells + record_cells + column_cells) / total
