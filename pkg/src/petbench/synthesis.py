"""Synthetic tabular data from a Gaussian copula over empirical marginals.

The model keeps each column's one-dimensional empirical distribution exactly
as observed (category frequencies, or the sorted sample as a quantile table)
and couples columns through the correlation matrix of their normal scores.
Sampling draws correlated standard normals, pushes them through the normal
CDF and inverts each marginal, so the output table has the input's schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import special as sp_special

from .data import DataTable, SchemaMismatchError
from .stats import midranks

_QUANTILE_GRID = np.linspace(0.01, 0.99, 99)


@dataclass(frozen=True)
class CategoricalMarginal:
    """Categories in latent band order with their relative frequencies."""

    categories: tuple[str, ...]
    probs: tuple[float, ...]

    def scores(self, values: np.ndarray) -> np.ndarray:
        """Map categories to the midpoints of their cumulative-frequency bands."""
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        mid = {c: (cum[i] + cum[i + 1]) / 2.0 for i, c in enumerate(self.categories)}
        fallback = 1.0  # unseen categories sort above everything observed
        return np.array([mid.get(v, fallback) for v in values])

    def invert(self, u: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(cum, u, side="left")
        idx = np.clip(idx, 0, len(self.categories) - 1)
        out = np.empty(u.shape[0], dtype=object)
        for i, k in enumerate(idx):
            out[i] = self.categories[int(k)]
        return out


@dataclass(frozen=True)
class NumericMarginal:
    """The sorted observed sample, used as an empirical quantile table."""

    sorted_values: np.ndarray

    def invert(self, u: np.ndarray) -> np.ndarray:
        n = self.sorted_values.shape[0]
        grid = (np.arange(n) + 0.5) / n
        return np.interp(u, grid, self.sorted_values)


@dataclass(frozen=True)
class CopulaModel:
    """A fitted Gaussian copula.

    Parameters
    ----------
    names : tuple of str
        Column order of the fitted table; samples come back in this order.
    marginals : tuple
        One :class:`CategoricalMarginal` or :class:`NumericMarginal` per column.
    correlation : ndarray
        Positive semi-definite normal-scores correlation matrix with unit
        diagonal.
    n_fit : int
        Number of rows the model was fitted on.
    """

    names: tuple[str, ...]
    marginals: tuple
    correlation: np.ndarray
    n_fit: int


def _principal_axis(table: DataTable) -> Optional[np.ndarray]:
    """Per-row score on the first principal component of the numeric columns.

    Categorical bands are laid out along this axis (see :func:`fit`), so
    nominal columns whose categories track the table's dominant numeric
    gradient become monotone in the latent space instead of arbitrarily
    ordered.  Returns None when fewer than two numeric columns exist.
    """
    n = table.n_rows
    z_cols = [
        sp_special.ndtri(np.clip((midranks(table.column(c)) - 0.5) / n, 1e-10, 1.0 - 1e-10))
        for c in table.names
        if table.is_numeric(c) and not np.isnan(table.column(c)).any()
    ]
    if len(z_cols) < 2:
        return z_cols[0] if z_cols else None
    z = np.column_stack(z_cols)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.nan_to_num(np.corrcoef(z, rowvar=False), nan=0.0)
    np.fill_diagonal(corr, 1.0)
    w, v = np.linalg.eigh(corr)
    return z @ v[:, -1]


def _linear_loading(edges: np.ndarray) -> float:
    """Correlation between a banded normal score and the latent normal.

    ``edges`` are the cumulative probabilities 0 = e_0 <= ... <= e_m = 1 of
    the score bands (tie groups).  Scores are constant on each band, so
    their correlation with the underlying normal is the band-mean loading
    E[s(X) X] / sd(s(X)); dividing the observed normal-scores correlation
    of two columns by both loadings undoes the tie attenuation.
    """
    edges = np.asarray(edges, dtype=np.float64)
    probs = np.diff(edges)
    keep = probs > 0.0
    probs = probs[keep]
    if probs.size <= 1:
        return 1.0  # constant column: correlations are undefined anyway
    lo = edges[:-1][keep]
    hi = edges[1:][keep]
    scores = sp_special.ndtri((lo + hi) / 2.0)
    phi_lo = np.where(lo > 0.0, np.exp(-0.5 * sp_special.ndtri(lo) ** 2), 0.0)
    phi_hi = np.where(hi < 1.0, np.exp(-0.5 * sp_special.ndtri(hi) ** 2), 0.0)
    cross = float(scores @ (phi_lo - phi_hi)) / np.sqrt(2.0 * np.pi)
    mean = float(scores @ probs)
    var = float((scores * scores) @ probs) - mean * mean
    if var <= 0.0:
        return 1.0
    return min(1.0, cross / np.sqrt(var))


def _repair_correlation(corr: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues to zero and rescale the diagonal back to one."""
    corr = np.where(np.isnan(corr), 0.0, np.clip(corr, -1.0, 1.0))
    np.fill_diagonal(corr, 1.0)
    corr = (corr + corr.T) / 2.0
    w, v = np.linalg.eigh(corr)
    if w.min() >= 0.0:
        return corr
    w = np.clip(w, 0.0, None)
    repaired = (v * w) @ v.T
    d = np.sqrt(np.diag(repaired).copy())
    d[d == 0.0] = 1.0
    repaired = repaired / np.outer(d, d)
    np.fill_diagonal(repaired, 1.0)
    return (repaired + repaired.T) / 2.0


def fit(table: DataTable) -> CopulaModel:
    """Fit marginals and the normal-scores correlation of a table.

    Parameters
    ----------
    table : DataTable
        At least two rows; numeric columns must not contain NaN (categorical
        missing markers are kept as a category of their own, so missingness
        itself is reproduced in samples).

    Returns
    -------
    CopulaModel
    """
    n = table.n_rows
    if n < 2:
        raise ValueError("fitting needs at least two rows")
    marginals = []
    z_cols = []
    loadings = []
    axis = _principal_axis(table)
    for name in table.names:
        col = table.column(name)
        if col.dtype == np.float64:
            if np.isnan(col).any():
                raise ValueError(f"numeric column {name!r} contains missing values")
            marginals.append(NumericMarginal(np.sort(col)))
            u = (midranks(col) - 0.5) / n
            _, counts = np.unique(col, return_counts=True)
        else:
            seen: dict[str, int] = {}
            for v in col:
                seen[v] = seen.get(v, 0) + 1
            if axis is None:
                categories = tuple(seen)
            else:  # band order: category mean along the principal axis
                sums: dict[str, float] = dict.fromkeys(seen, 0.0)
                for v, a in zip(col, axis):
                    sums[v] += a
                categories = tuple(sorted(seen, key=lambda c: (sums[c] / seen[c], c)))
            probs = tuple(seen[c] / n for c in categories)
            marginal = CategoricalMarginal(categories, probs)
            marginals.append(marginal)
            u = marginal.scores(col)
            counts = np.array([seen[c] for c in categories], dtype=np.float64)
        edges = np.concatenate([[0.0], np.cumsum(counts) / n])
        loadings.append(_linear_loading(edges))
        z_cols.append(sp_special.ndtri(np.clip(u, 1e-10, 1.0 - 1e-10)))
    z = np.column_stack(z_cols)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(z, rowvar=False)
        # ties flatten the observed correlations; undo both columns' loadings
        corr = np.atleast_2d(corr) / np.outer(loadings, loadings)
    return CopulaModel(
        names=table.names,
        marginals=tuple(marginals),
        correlation=_repair_correlation(corr),
        n_fit=n,
    )


def sample(model: CopulaModel, n: int, seed: int) -> DataTable:
    """Draw ``n`` synthetic rows from a fitted model.

    Sampling is deterministic per seed: correlated normals come from a
    seeded generator through the (eigendecomposition) factor of the
    correlation matrix, and each marginal is inverted by linear
    interpolation between adjacent empirical quantiles, so numeric outputs
    stay within the fitted minimum and maximum.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    d = len(model.names)
    w, v = np.linalg.eigh(model.correlation)
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    z = rng.standard_normal((n, d)) @ factor.T
    u = sp_special.ndtr(z)
    columns = []
    for j, name in enumerate(model.names):
        columns.append((name, model.marginals[j].invert(u[:, j])))
    return DataTable(columns)


# -- utility reporting -------------------------------------------------------


@dataclass(frozen=True)
class UtilityReport:
    """How closely a synthetic table tracks the original one.

    ``tv_distance`` holds per-categorical-column total variation distances,
    ``quantile_deviation`` per-numeric-column maxima of |q_orig - q_synth|
    over the 1..99 percent grid normalized by the original range,
    ``spearman_max_deviation`` the largest pairwise rank-correlation shift
    across numeric columns (rank correlation needs an order, so nominal
    columns are covered by their TV distance instead; None without at
    least two numeric columns), and ``exact_match_rate`` the fraction of
    synthetic rows identical to some original row.
    """

    tv_distance: dict[str, float]
    quantile_deviation: dict[str, float]
    spearman_max_deviation: Optional[float]
    exact_match_rate: float


def _tv_distance(a: np.ndarray, b: np.ndarray) -> float:
    freq_a: dict = {}
    freq_b: dict = {}
    for v in a:
        freq_a[v] = freq_a.get(v, 0) + 1
    for v in b:
        freq_b[v] = freq_b.get(v, 0) + 1
    keys = set(freq_a) | set(freq_b)
    return 0.5 * sum(
        abs(freq_a.get(k, 0) / len(a) - freq_b.get(k, 0) / len(b)) for k in keys
    )


def _quantile_deviation(orig: np.ndarray, synth: np.ndarray) -> float:
    span = float(orig.max() - orig.min())
    q_o = np.quantile(orig, _QUANTILE_GRID)
    q_s = np.quantile(synth, _QUANTILE_GRID)
    worst = float(np.abs(q_o - q_s).max())
    if span == 0.0:
        return 0.0 if worst == 0.0 else 1.0
    return worst / span


def _spearman_matrix(scores: np.ndarray) -> np.ndarray:
    ranks = np.column_stack([midranks(scores[:, j]) for j in range(scores.shape[1])])
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(ranks, rowvar=False)
    return np.atleast_2d(np.nan_to_num(corr, nan=0.0))


def utility_report(original: DataTable, synthetic: DataTable) -> UtilityReport:
    """Compare a synthetic table against the table it should imitate.

    Raises
    ------
    SchemaMismatchError
        If column names, order, or storage kinds differ.
    """
    if original.names != synthetic.names:
        raise SchemaMismatchError(
            f"column mismatch: {original.names} vs {synthetic.names}"
        )
    for name in original.names:
        if original.is_numeric(name) != synthetic.is_numeric(name):
            raise SchemaMismatchError(f"column {name!r} changed kind")
    if original.n_rows == 0 or synthetic.n_rows == 0:
        raise ValueError("utility comparison needs non-empty tables")

    tv: dict[str, float] = {}
    qdev: dict[str, float] = {}
    numeric_names = []
    for name in original.names:
        o_col = original.column(name)
        s_col = synthetic.column(name)
        if original.is_numeric(name):
            qdev[name] = _quantile_deviation(o_col, s_col)
            numeric_names.append(name)
        else:
            tv[name] = _tv_distance(o_col, s_col)

    spearman_dev: Optional[float] = None
    if len(numeric_names) >= 2:
        o_scores = np.column_stack([original.column(n) for n in numeric_names])
        s_scores = np.column_stack([synthetic.column(n) for n in numeric_names])
        delta = np.abs(_spearman_matrix(o_scores) - _spearman_matrix(s_scores))
        iu = np.triu_indices(len(numeric_names), k=1)
        spearman_dev = float(delta[iu].max())

    originals = {original.row(i) for i in range(original.n_rows)}
    matches = sum(1 for i in range(synthetic.n_rows) if synthetic.row(i) in originals)
    return UtilityReport(
        tv_distance=tv,
        quantile_deviation=qdev,
        spearman_max_deviation=spearman_dev,
        exact_match_rate=matches / synthetic.n_rows,
    )


# -- serialization -----------------------------------------------------------


def model_to_json(model: CopulaModel) -> str:
    cols = []
    for name, marginal in zip(model.names, model.marginals):
        if isinstance(marginal, NumericMarginal):
            cols.append(
                {"name": name, "kind": "numeric", "values": marginal.sorted_values.tolist()}
            )
        else:
            cols.append(
                {
                    "name": name,
                    "kind": "categorical",
                    "categories": list(marginal.categories),
                    "probs": list(marginal.probs),
                }
            )
    payload = {
        "columns": cols,
        "correlation": model.correlation.tolist(),
        "n_fit": model.n_fit,
    }
    return json.dumps(payload)


def model_from_json(text: str) -> CopulaModel:
    payload = json.loads(text)
    names = []
    marginals = []
    for col in payload["columns"]:
        names.append(col["name"])
        if col["kind"] == "numeric":
            marginals.append(NumericMarginal(np.asarray(col["values"], dtype=np.float64)))
        else:
            marginals.append(
                CategoricalMarginal(tuple(col["categories"]), tuple(col["probs"]))
            )
    return CopulaModel(
        names=tuple(names),
        marginals=tuple(marginals),
        correlation=np.asarray(payload["correlation"], dtype=np.float64),
        n_fit=int(payload["n_fit"]),
    )
