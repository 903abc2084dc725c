"""Partisan metrics on district-level two-party results.

Sign conventions: every signed metric is positive when it favours the
Democratic ("D") side. Vote shares are D / (D + R). Shares, medians, means
and swing comparisons are evaluated in exact rational arithmetic, so the
two-district identities (mean-median and partisan bias both zero) and the
D/R mirror antisymmetry hold exactly rather than up to rounding.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from statistics import median
from typing import Mapping

from .graph import DualGraph, ElectionTallies, GraphDataError
from .partition import Assignment

MEAN_MEDIAN_CONVENTION = "median(D share) - mean(D share); positive favours D"
EFFICIENCY_GAP_CONVENTION = "(wasted R - wasted D) / two-party votes; winner wastes votes above half"
PARTISAN_BIAS_CONVENTION = "S(0.5) - 0.5 under uniform swing, ties count half a seat"


class DegenerateTallyWarning(UserWarning):
    """All districts have the same vote share, so the seats-votes curve is a single jump."""


@dataclass(frozen=True)
class DistrictTally:
    """Two-party votes per district label: ``votes[d] == (votes_d, votes_r)``."""

    votes: Mapping[int, tuple[int, int]]

    @property
    def k(self) -> int:
        return len(self.votes)

    def shares(self) -> list[Fraction]:
        out = []
        for d, (dem, rep) in sorted(self.votes.items()):
            if dem + rep <= 0:
                raise ValueError(f"district {d} has no two-party votes")
            out.append(Fraction(dem, dem + rep))
        return out

    def mirrored(self) -> "DistrictTally":
        return DistrictTally({d: (r, dem) for d, (dem, r) in self.votes.items()})


@dataclass(frozen=True)
class SeatOutcome:
    seats_d: int
    seats_r: int
    ties: int

    def label(self) -> str:
        text = f"{self.seats_d}D-{self.seats_r}R"
        return text + f"-{self.ties}T" if self.ties else text


@dataclass(frozen=True)
class SeatsVotesCurve:
    points: list[tuple[float, float]]
    breakpoints: list[float]


def district_tally(g: DualGraph, a: Assignment, t: ElectionTallies) -> DistrictTally:
    dem = [0] * a.k
    rep = [0] * a.k
    for node, label in zip(g.nodes, a.labels):
        try:
            counts = t.votes[node.id]
        except KeyError:
            raise GraphDataError(f"node {node.id!r} missing from {t.contest!r} tallies") from None
        dem[label - 1] += counts.get("D", 0)
        rep[label - 1] += counts.get("R", 0)
    return DistrictTally({d: (dem[d - 1], rep[d - 1]) for d in range(1, a.k + 1)})


def seat_outcome(dt: DistrictTally) -> SeatOutcome:
    d = sum(1 for dem, rep in dt.votes.values() if dem > rep)
    r = sum(1 for dem, rep in dt.votes.values() if rep > dem)
    return SeatOutcome(d, r, dt.k - d - r)


def wasted_votes(dem: int, rep: int) -> tuple[Fraction, Fraction]:
    """Wasted (D, R) votes in one district; the winner wastes everything above half."""
    half = Fraction(dem + rep, 2)
    if dem > rep:
        return dem - half, Fraction(rep)
    if rep > dem:
        return Fraction(dem), rep - half
    return Fraction(0), Fraction(0)


def efficiency_gap(dt: DistrictTally) -> float:
    total = sum(dem + rep for dem, rep in dt.votes.values())
    if total <= 0:
        raise ValueError("efficiency gap needs a positive two-party vote total")
    gap = Fraction(0)
    for dem, rep in dt.votes.values():
        wd, wr = wasted_votes(dem, rep)
        gap += wr - wd
    return float(gap / total)


def mean_median(dt: DistrictTally) -> float:
    if dt.k == 0:
        raise ValueError("empty district tally")
    shares = dt.shares()
    return float(median(shares) - sum(shares) / len(shares))


def _clamp(x: Fraction) -> Fraction:
    return min(max(x, Fraction(0)), Fraction(1))


def _seat_share(shares: list[Fraction], swing: Fraction) -> Fraction:
    half = Fraction(1, 2)
    seats = Fraction(0)
    for s in shares:
        moved = _clamp(s + swing)
        if moved > half:
            seats += 1
        elif moved == half:
            seats += half
    return seats / len(shares)


def _mean_clamped(shares: list[Fraction], swing: Fraction) -> Fraction:
    return sum(_clamp(s + swing) for s in shares) / len(shares)


def swing_for(shares: list[Fraction], target: Fraction) -> Fraction:
    """Common shift that moves the average clamped district share to ``target``.

    While no district is pushed past 0 or 1 this is simply
    ``target - mean(shares)``; the clamped average is piecewise linear and
    nondecreasing in the shift, so the solve is exact.
    """
    if target <= 0:
        return Fraction(-1)
    if target >= 1:
        return Fraction(1)
    knots = sorted({-s for s in shares} | {1 - s for s in shares} | {Fraction(-1), Fraction(1)})
    values = [_mean_clamped(shares, x) for x in knots]
    for (x0, f0), (x1, f1) in zip(zip(knots, values), zip(knots[1:], values[1:])):
        if f0 <= target <= f1 and f1 > f0:
            return x0 + (target - f0) * (x1 - x0) / (f1 - f0)
    raise AssertionError("unreachable: clamped mean spans [0, 1]")


def seats_at(dt: DistrictTally, vote_share) -> float:
    """D seat share after uniformly swinging the plan to statewide share ``vote_share``."""
    shares = dt.shares()
    return float(_seat_share(shares, swing_for(shares, Fraction(vote_share))))


def partisan_bias(dt: DistrictTally) -> float:
    shares = dt.shares()
    if len(set(shares)) == 1:
        warnings.warn("all district shares are equal; partisan bias is 0", DegenerateTallyWarning)
        return 0.0
    half = Fraction(1, 2)
    return float(_seat_share(shares, swing_for(shares, half)) - half)


def seats_votes_curve(dt: DistrictTally, resolution: int = 101) -> SeatsVotesCurve:
    """Sample the uniform-swing seats-votes curve on an even grid over [0, 1].

    ``statewide share`` here is the average district D share. The swing for
    each sampled share is solved so that the clamped district shares average
    to it, which pins the endpoints at (0, 0) and (1, 1). Breakpoints are the
    statewide shares at which some district crosses one half.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    shares = dt.shares()
    points = []
    for i in range(resolution):
        v = Fraction(i, resolution - 1)
        points.append((float(v), float(_seat_share(shares, swing_for(shares, v)))))
    breaks = sorted({float(_mean_clamped(shares, Fraction(1, 2) - s)) for s in shares})
    return SeatsVotesCurve(points, breaks)


def reallocate_independents(t: ElectionTallies, target: str) -> ElectionTallies:
    if target not in ("D", "R"):
        raise ValueError(f"target must be 'D' or 'R', got {target!r}")
    votes = {}
    for node_id, counts in t.votes.items():
        counts = dict(counts)
        moved = counts.get("I", 0)
        if moved:
            counts[target] = counts.get(target, 0) + moved
            counts["I"] = 0
        votes[node_id] = counts
    return ElectionTallies(t.contest, votes)


@dataclass(frozen=True)
class ShareHistogram:
    edges: list[float]
    weights: list[int]
    no_vote: int


def weighted_share_histogram(g: DualGraph, t: ElectionTallies, bins: int = 10) -> ShareHistogram:
    """Population landing in each D-share bin; bins are ``[i/bins, (i+1)/bins)``, last one closed."""
    if bins < 1:
        raise ValueError("bins must be at least 1")
    weights = [0] * bins
    no_vote = 0
    for node in g.nodes:
        counts = t.votes.get(node.id, {})
        dem, rep = counts.get("D", 0), counts.get("R", 0)
        if dem + rep == 0:
            no_vote += node.population
            continue
        # Integer bin index avoids float edge effects such as 0.6 * 10 < 6.
        weights[min(dem * bins // (dem + rep), bins - 1)] += node.population
    return ShareHistogram([i / bins for i in range(bins + 1)], weights, no_vote)
