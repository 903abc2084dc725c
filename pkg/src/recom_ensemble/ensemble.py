"""Aggregates over an ensemble of plans.

Everything here consumes plans as a stream and keeps state proportional to
the graph size (or number of districts), never to the number of plans times
nodes.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .graph import DualGraph, ElectionTallies, GraphDataError
from .metrics import (
    DistrictTally,
    SeatOutcome,
    district_tally,
    efficiency_gap,
    mean_median,
    partisan_bias,
    seat_outcome,
)
from .partition import Assignment, county_splits

PERCENTILE_CONVENTION = "mid-rank: (count below + count equal / 2) / n"
QUARTILE_CONVENTION = "linear interpolation between order statistics (numpy 'linear')"

METRICS: dict[str, Callable[[DistrictTally], float]] = {
    "efficiency_gap": efficiency_gap,
    "mean_median": mean_median,
    "partisan_bias": partisan_bias,
    "seats_d": lambda dt: float(seat_outcome(dt).seats_d),
}


@dataclass
class ScoreSeries:
    metric: str
    contest: str
    values: list[float] = field(default_factory=list)
    indices: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.values)

    def append(self, index: int, value: float) -> None:
        self.indices.append(index)
        self.values.append(value)


def score_series(
    ensemble: Iterable[Assignment], g: DualGraph, t: ElectionTallies, metric: str
) -> ScoreSeries:
    try:
        fn = METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}") from None
    series = ScoreSeries(metric, t.contest)
    for i, a in enumerate(ensemble):
        series.append(i, fn(district_tally(g, a, t)))
    return series


@dataclass(frozen=True)
class CoMembershipMap:
    anchor: str
    freq: dict[str, float]


class CoMembership:
    """Streaming counter of how often each node shares the anchor's district."""

    def __init__(self, g: DualGraph, anchor: str):
        if anchor not in g.index:
            raise GraphDataError(f"unknown anchor node {anchor!r}")
        self.graph = g
        self.anchor = anchor
        self._anchor = g.index[anchor]
        self._counts = np.zeros(len(g), dtype=np.int64)
        self.plans = 0

    def add(self, a: Assignment) -> None:
        labels = np.asarray(a.labels)
        self._counts += labels == labels[self._anchor]
        self.plans += 1

    def result(self) -> CoMembershipMap:
        if not self.plans:
            raise ValueError("co-membership needs at least one plan")
        ids = self.graph.node_ids()
        return CoMembershipMap(
            self.anchor, {ids[i]: int(c) / self.plans for i, c in enumerate(self._counts)}
        )


def co_membership(ensemble: Iterable[Assignment], anchor: str, g: DualGraph | None = None):
    acc = None
    for a in ensemble:
        if acc is None:
            acc = CoMembership(g if g is not None else a.graph, anchor)
        acc.add(a)
    if acc is None:
        raise ValueError("co-membership needs at least one plan")
    return acc.result()


def outcome_tally(
    ensemble: Iterable[Assignment], g: DualGraph, t: ElectionTallies
) -> Counter[SeatOutcome]:
    return Counter(seat_outcome(district_tally(g, a, t)) for a in ensemble)


def split_outcome(outcome: SeatOutcome) -> bool:
    """True when each party wins at least one district."""
    return outcome.seats_d > 0 and outcome.seats_r > 0


def filter_by_outcome(
    series: ScoreSeries,
    ensemble: Sequence[Assignment],
    g: DualGraph,
    t: ElectionTallies,
    predicate: Callable[[SeatOutcome], bool],
) -> ScoreSeries:
    if len(series) != len(ensemble):
        raise ValueError(
            f"series has {len(series)} values but the ensemble has {len(ensemble)} plans"
        )
    out = ScoreSeries(series.metric, series.contest)
    for i, v, a in zip(series.indices, series.values, ensemble):
        if predicate(seat_outcome(district_tally(g, a, t))):
            out.append(i, v)
    return out


def histogram(
    series: ScoreSeries | Sequence[float], bins: int = 20, range: tuple[float, float] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Counts per bin over ``[min, max]`` (or ``range``); numpy's closed-last-bin rule."""
    values = series.values if isinstance(series, ScoreSeries) else list(series)
    if not values:
        raise ValueError("cannot histogram an empty series")
    if bins < 1:
        raise ValueError("bins must be at least 1")
    return np.histogram(values, bins=bins, range=range)


def percentile_of(series: ScoreSeries | Sequence[float], value: float) -> float:
    values = series.values if isinstance(series, ScoreSeries) else list(series)
    if not values:
        raise ValueError("percentile of an empty series")
    below = sum(1 for v in values if v < value)
    equal = sum(1 for v in values if v == value)
    return (below + equal / 2) / len(values)


@dataclass(frozen=True)
class BoxStats:
    rank: int
    min: float
    q1: float
    median: float
    q3: float
    max: float


def ranked_shares(dt: DistrictTally) -> list[float]:
    return sorted(float(s) for s in dt.shares())


def ranked_share_boxstats(
    ensemble: Iterable[Assignment], g: DualGraph, t: ElectionTallies
) -> list[BoxStats]:
    rows = [ranked_shares(district_tally(g, a, t)) for a in ensemble]
    if not rows:
        raise ValueError("box stats need at least one plan")
    table = np.asarray(rows)
    out = []
    for r in np.arange(table.shape[1]):
        col = table[:, r]
        q = np.percentile(col, [0, 25, 50, 75, 100], method="linear")
        out.append(BoxStats(int(r) + 1, *(float(x) for x in q)))
    return out


@dataclass
class SplitDistribution:
    split_counties: Counter = field(default_factory=Counter)
    total_splits: Counter = field(default_factory=Counter)

    @property
    def plans(self) -> int:
        return sum(self.split_counties.values())


def split_distribution(ensemble: Iterable[Assignment], g: DualGraph) -> SplitDistribution:
    dist = SplitDistribution()
    for a in ensemble:
        report = county_splits(g, a)
        dist.split_counties[report.split_counties] += 1
        dist.total_splits[report.total_splits] += 1
    return dist
