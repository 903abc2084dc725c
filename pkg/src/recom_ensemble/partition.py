"""Districting plans and their legality predicates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .graph import DualGraph, GraphDataError


class Assignment:
    """A districting plan: one district label in ``1..k`` per graph node.

    Labels are held in canonical node order. District populations are
    computed once at construction and cached.
    """

    __slots__ = ("graph", "labels", "k", "district_pops")

    def __init__(self, graph: DualGraph, labels: Sequence[int]):
        labels = tuple(int(x) for x in labels)
        if len(labels) != len(graph):
            raise GraphDataError(
                f"assignment has {len(labels)} labels for a graph of {len(graph)} nodes"
            )
        k = max(labels) if labels else 0
        pops = [0] * k
        for label, node in zip(labels, graph.nodes):
            if label < 1:
                raise GraphDataError(f"node {node.id!r}: district label {label} must be >= 1")
            pops[label - 1] += node.population
        present = set(labels)
        for d in range(1, k + 1):
            if d not in present:
                raise GraphDataError(f"district {d} is empty")
        self.graph = graph
        self.labels = labels
        self.k = k
        self.district_pops = {d: pops[d - 1] for d in range(1, k + 1)}

    @classmethod
    def from_mapping(cls, graph: DualGraph, plan: Mapping[str, int]) -> "Assignment":
        missing = [n for n in graph.node_ids() if n not in plan]
        if missing:
            raise GraphDataError(f"plan does not assign node {missing[0]!r}")
        extra = [n for n in plan if n not in graph.index]
        if extra:
            raise GraphDataError(f"plan assigns unknown node {extra[0]!r}")
        return cls(graph, [plan[n] for n in graph.node_ids()])

    @property
    def plan(self) -> dict[str, int]:
        return dict(zip(self.graph.node_ids(), self.labels))

    def members(self, district: int) -> list[int]:
        return [i for i, d in enumerate(self.labels) if d == district]

    def parts(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {d: [] for d in range(1, self.k + 1)}
        for i, d in enumerate(self.labels):
            out[d].append(i)
        return out

    def canonical(self) -> tuple[int, ...]:
        """Labels renumbered by first appearance; equal for relabelled plans."""
        seen: dict[int, int] = {}
        return tuple(seen.setdefault(d, len(seen) + 1) for d in self.labels)

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.graph is other.graph and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        return f"Assignment(k={self.k}, pops={self.district_pops})"


@dataclass(frozen=True)
class LegalityConfig:
    epsilon: float = 0.02
    require_contiguity: bool = True

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must be in [0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class CountySplitReport:
    split_counties: int
    total_splits: int


def is_contiguous(g: DualGraph, a: Assignment) -> dict[int, bool]:
    if a.graph is not g and len(a.labels) != len(g):
        raise GraphDataError("assignment does not cover the graph")
    return {d: g.is_connected(nodes) for d, nodes in a.parts().items()}


def population_bounds(ideal, epsilon: float) -> tuple[int, int]:
    """Integer population range ``[lo, hi]`` with ``|pop - ideal| <= epsilon * ideal``.

    Evaluated in exact rational arithmetic on the binary value of ``epsilon``,
    so a population inside the bounds always reports a float deviation of at
    most ``epsilon``.
    """
    ideal = Fraction(ideal)
    slack = ideal * Fraction(epsilon)
    return math.ceil(ideal - slack), math.floor(ideal + slack)


def population_deviation(g: DualGraph, a: Assignment) -> float:
    """Largest ``|pop(d) - ideal| / ideal`` over districts, with ``ideal = total / k``.

    Computed exactly as a fraction and rounded once to the nearest float.
    """
    total = g.total_population()
    if total <= 0:
        raise GraphDataError("total population must be positive")
    ideal = Fraction(total, a.k)
    worst = max(abs(pop - ideal) for pop in a.district_pops.values())
    return float(worst / ideal)


def is_legal(g: DualGraph, a: Assignment, cfg: LegalityConfig) -> bool:
    if population_deviation(g, a) > cfg.epsilon:
        return False
    return not cfg.require_contiguity or all(is_contiguous(g, a).values())


def county_splits(g: DualGraph, a: Assignment) -> CountySplitReport:
    """Count counties touching two or more districts, and the total number of extra pieces."""
    districts: dict[str, set[int]] = {}
    for node, label in zip(g.nodes, a.labels):
        if node.county is None:
            raise GraphDataError(f"node {node.id!r} has no county tag")
        districts.setdefault(node.county, set()).add(label)
    split = sum(1 for ds in districts.values() if len(ds) > 1)
    total = sum(len(ds) - 1 for ds in districts.values())
    return CountySplitReport(split, total)
