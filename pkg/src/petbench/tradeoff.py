"""Ranking treatments on the energy / accuracy / privacy trade-off.

Points aggregate a run log per (dataset, treatment, model): mean raw joules
over the train and evaluate phases, mean evaluation accuracy, and an ordinal
privacy rank from a configurable scale.  Lower energy is better; higher
accuracy and privacy are better.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class PrivacyScale:
    """Ordinal protection ranks per treatment; bigger means more protective."""

    ranks: Mapping[str, int]

    def rank(self, treatment: str) -> int:
        try:
            return int(self.ranks[treatment])
        except KeyError:
            raise ValueError(
                f"privacy scale has no rank for treatment {treatment!r}; "
                f"known: {sorted(self.ranks)}"
            ) from None


DEFAULT_PRIVACY_SCALE = PrivacyScale(
    {"benchmark": 0, "k=3": 1, "k=10": 2, "k=27": 3, "synthetic": 3}
)


@dataclass(frozen=True)
class TradeoffPoint:
    dataset: str
    treatment: str
    model: str
    joules: float
    accuracy: float
    privacy: int


@dataclass(frozen=True)
class ScoredPoint:
    point: TradeoffPoint
    score: float
    rank: int  # 1 = best


@dataclass(frozen=True)
class ScenarioWeights:
    """Relative importance of accuracy, energy, and privacy (non-negative,
    not all zero; normalized to sum one before scoring)."""

    accuracy: float
    energy: float
    privacy: float

    def __post_init__(self):
        if min(self.accuracy, self.energy, self.privacy) < 0:
            raise ValueError("weights must be non-negative")
        if self.accuracy + self.energy + self.privacy <= 0:
            raise ValueError("at least one weight must be positive")

    def normalized(self) -> "ScenarioWeights":
        total = self.accuracy + self.energy + self.privacy
        return ScenarioWeights(self.accuracy / total, self.energy / total, self.privacy / total)


def scenario_presets() -> dict[int, ScenarioWeights]:
    """The three stock scenarios: 0 balances all dimensions equally,
    1 cares only about accuracy, 2 only about energy."""
    third = 1.0 / 3.0
    return {
        0: ScenarioWeights(third, third, third),
        1: ScenarioWeights(1.0, 0.0, 0.0),
        2: ScenarioWeights(0.0, 1.0, 0.0),
    }


def collect_points(
    records: Iterable[Mapping],
    scale: PrivacyScale = DEFAULT_PRIVACY_SCALE,
    dataset: str | None = None,
) -> list[TradeoffPoint]:
    """Aggregate run-log records into one point per (dataset, treatment, model).

    Joules are the per-repetition sums of the train and evaluate phases,
    averaged over repetitions; accuracy is averaged over the evaluate
    phases.  Error records are skipped.  Points come back in first-appearance
    order of their grid cell.
    """
    energy: dict[tuple, dict[int, float]] = {}
    accuracy: dict[tuple, list[float]] = {}
    order: list[tuple] = []
    for rec in records:
        if rec.get("status") != "ok" or rec.get("model") is None:
            continue
        if rec.get("phase") not in ("train", "evaluate"):
            continue
        if dataset is not None and rec.get("dataset") != dataset:
            continue
        cell = (rec["dataset"], rec["treatment"], rec["model"])
        if cell not in energy:
            energy[cell] = {}
            accuracy[cell] = []
            order.append(cell)
        rep = int(rec["repetition"])
        energy[cell][rep] = energy[cell].get(rep, 0.0) + float(rec["joules"])
        if rec["phase"] == "evaluate" and rec.get("accuracy") is not None:
            accuracy[cell].append(float(rec["accuracy"]))
    points = []
    for cell in order:
        if not accuracy[cell]:
            continue
        reps = energy[cell]
        points.append(
            TradeoffPoint(
                dataset=cell[0],
                treatment=cell[1],
                model=cell[2],
                joules=float(np.mean(list(reps.values()))),
                accuracy=float(np.mean(accuracy[cell])),
                privacy=scale.rank(cell[1]),
            )
        )
    return points


def _dominates(q: TradeoffPoint, p: TradeoffPoint) -> bool:
    at_least = q.joules <= p.joules and q.accuracy >= p.accuracy and q.privacy >= p.privacy
    strict = q.joules < p.joules or q.accuracy > p.accuracy or q.privacy > p.privacy
    return at_least and strict


def pareto_front(points: Sequence[TradeoffPoint]) -> list[TradeoffPoint]:
    """The non-dominated subset, in input order.

    A point is dominated when some other point is at least as good on all
    three dimensions (joules down, accuracy up, privacy up) and strictly
    better on one.  Duplicate coordinates do not dominate each other.
    """
    if not points:
        raise ValueError("no points to rank")
    joules = np.array([p.joules for p in points])
    acc = np.array([p.accuracy for p in points])
    priv = np.array([p.privacy for p in points], dtype=np.float64)
    keep = []
    for i in range(len(points)):
        at_least = (joules <= joules[i]) & (acc >= acc[i]) & (priv >= priv[i])
        strict = (joules < joules[i]) | (acc > acc[i]) | (priv > priv[i])
        if not (at_least & strict).any():
            keep.append(points[i])
    return keep


def _normalize(values: np.ndarray, invert: bool = False) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(values.shape[0], 0.5)  # degenerate dimension carries no signal
    scaled = (values - lo) / (hi - lo)
    return 1.0 - scaled if invert else scaled


def scenario_rank(
    points: Sequence[TradeoffPoint], weights: ScenarioWeights
) -> list[ScoredPoint]:
    """Score every point under the scenario and rank best-first.

    Each dimension is min-max normalized over the given points (energy is
    inverted so that cheaper is better).  Equal scores break toward higher
    accuracy, then lower joules, then treatment name.
    """
    if not points:
        raise ValueError("no points to rank")
    w = weights.normalized()
    acc_n = _normalize(np.array([p.accuracy for p in points]))
    energy_n = _normalize(np.array([p.joules for p in points]), invert=True)
    priv_n = _normalize(np.array([p.privacy for p in points], dtype=np.float64))
    scores = w.accuracy * acc_n + w.energy * energy_n + w.privacy * priv_n
    order = sorted(
        range(len(points)),
        key=lambda i: (-scores[i], -points[i].accuracy, points[i].joules, points[i].treatment),
    )
    return [
        ScoredPoint(point=points[i], score=float(scores[i]), rank=rank + 1)
        for rank, i in enumerate(order)
    ]
