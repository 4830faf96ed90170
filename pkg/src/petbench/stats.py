"""Rank-based two-sample significance testing (Mann-Whitney U).

Ranks are midranks: tied observations share the average of the positions
they occupy, so each sample's U statistic counts won pairs plus half the
tied pairs and U_a + U_b == n1 * n2 always holds.

Two p-value routes are provided.  The exact route enumerates the null
distribution of U over all C(n1+n2, n1) label assignments (computed by a
counting recurrence, which is the same distribution without materializing
the assignments) and is only valid without ties.  The approximate route
uses the normal limit with the standard tie-corrected variance and a 0.5
continuity correction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class Alternative(str, enum.Enum):
    TWO_SIDED = "two_sided"
    GREATER = "greater"
    LESS = "less"


class Method(str, enum.Enum):
    AUTO = "auto"
    EXACT = "exact"
    NORMAL_APPROX = "normal_approx"


class TiesInExactError(ValueError):
    """The exact method was requested but the data contains ties."""


_EXACT_LIMIT = 20  # per-sample size cap for the exact null distribution


@dataclass(frozen=True)
class UTestResult:
    u: float
    p: float
    method: Method
    n1: int
    n2: int
    ties: bool


def midranks(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the average of their positions."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.shape[0], dtype=np.float64)
    i = 0
    n = arr.shape[0]
    while i < n:
        j = i
        while j + 1 < n and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        # positions i..j (0-based) share the average rank
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def u_statistic(a, b) -> float:
    """U for the first sample: won (a > b) pairs plus half of the tied pairs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    combined = np.concatenate([a, b])
    ranks = midranks(combined)
    r_a = float(ranks[: a.size].sum())
    return r_a - a.size * (a.size + 1) / 2.0


def _exact_u_counts(n1: int, n2: int) -> np.ndarray:
    """Count label assignments per U value under the null, as exact int64.

    f(m, n, u) = f(m-1, n, u-n) + f(m, n-1, u): the largest observation
    belongs either to the first sample (beating all n of the second) or to
    the second.  Total mass is C(n1+n2, n1), which stays well inside int64
    for the exact-method size cap.
    """
    max_u = n1 * n2
    counts = np.zeros((n1 + 1, n2 + 1, max_u + 1), dtype=np.int64)
    counts[0, :, 0] = 1
    counts[:, 0, 0] = 1
    for m in range(1, n1 + 1):
        for n in range(1, n2 + 1):
            span = m * n
            row = counts[m - 1, n, : span - n + 1]
            counts[m, n, n : span + 1] += row
            counts[m, n, : span + 1] += counts[m, n - 1, : span + 1]
    return counts[n1, n2]


def _exact_p(u: float, n1: int, n2: int, alternative: Alternative) -> float:
    counts = _exact_u_counts(n1, n2)
    total = counts.sum()
    ui = int(round(u))
    p_greater = counts[ui:].sum() / total
    p_less = counts[: ui + 1].sum() / total
    if alternative is Alternative.GREATER:
        return float(p_greater)
    if alternative is Alternative.LESS:
        return float(p_less)
    return float(min(1.0, 2.0 * min(p_greater, p_less)))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _normal_p(
    u: float, n1: int, n2: int, combined: np.ndarray, alternative: Alternative
) -> float:
    n = n1 + n2
    mean = n1 * n2 / 2.0
    _, tie_counts = np.unique(combined, return_counts=True)
    tie_term = float(((tie_counts**3) - tie_counts).sum()) / (n * (n - 1))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0.0:
        return 1.0  # every observation tied: no evidence either way
    sd = math.sqrt(var)
    # continuity correction pulls U half a step toward the mean
    p_greater = _normal_sf((u - mean - 0.5) / sd)
    p_less = _normal_sf((mean - u - 0.5) / sd)
    if alternative is Alternative.GREATER:
        return p_greater
    if alternative is Alternative.LESS:
        return p_less
    return min(1.0, 2.0 * min(p_greater, p_less))


def mann_whitney(
    a,
    b,
    alternative: Alternative = Alternative.TWO_SIDED,
    method: Method = Method.AUTO,
) -> UTestResult:
    """Two-sample Mann-Whitney U test on independent samples.

    ``Auto`` resolves to the exact null distribution when there are no ties
    and both samples have at most 20 observations, and to the tie-corrected
    normal approximation otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    alternative = Alternative(alternative)
    method = Method(method)

    combined = np.concatenate([a, b])
    ties = np.unique(combined).size < combined.size
    n1, n2 = int(a.size), int(b.size)
    u = u_statistic(a, b)

    if method is Method.AUTO:
        small = n1 <= _EXACT_LIMIT and n2 <= _EXACT_LIMIT
        method = Method.EXACT if (small and not ties) else Method.NORMAL_APPROX
    if method is Method.EXACT:
        if ties:
            raise TiesInExactError("exact method is not defined for tied data")
        if n1 > _EXACT_LIMIT or n2 > _EXACT_LIMIT:
            raise ValueError(
                f"exact method supports at most {_EXACT_LIMIT} observations per sample"
            )
        p = _exact_p(u, n1, n2, alternative)
    else:
        p = _normal_p(u, n1, n2, combined, alternative)
    return UTestResult(u=u, p=p, method=method, n1=n1, n2=n2, ties=ties)


@dataclass(frozen=True)
class PairwiseMatrix:
    """One-sided p-values for every ordered pair of labeled groups."""

    labels: tuple[str, ...]
    p: np.ndarray  # NaN on the diagonal

    def entry(self, row: str, col: str) -> float:
        return float(self.p[self.labels.index(row), self.labels.index(col)])


def pairwise_matrix(
    groups: Mapping[str, Sequence[float]],
    alternative: Alternative = Alternative.GREATER,
    method: Method = Method.AUTO,
) -> PairwiseMatrix:
    """Test every ordered pair of groups; entry (i, j) is p for group_i vs group_j."""
    labels = tuple(groups)
    if len(labels) < 2:
        raise ValueError("pairwise testing needs at least two groups")
    n = len(labels)
    p = np.full((n, n), np.nan)
    for i, la in enumerate(labels):
        for j, lb in enumerate(labels):
            if i == j:
                continue
            p[i, j] = mann_whitney(groups[la], groups[lb], alternative, method).p
    return PairwiseMatrix(labels=labels, p=p)
