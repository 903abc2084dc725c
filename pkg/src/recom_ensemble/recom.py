"""ReCom (recombination) chain over a dual graph.

Random spanning trees are minimum spanning trees under independent
uniform(0, 1) edge weights, found with Kruskal's algorithm. All randomness
comes from numpy's ``PCG64`` bit generator seeded with a 64-bit integer,
which produces the same stream on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .graph import DualGraph, GraphDataError
from .partition import (
    Assignment,
    LegalityConfig,
    is_legal,
    population_bounds,
)

RNG_ALGORITHM = "numpy.random.PCG64"


class InfeasibleError(RuntimeError):
    """Retry budget exhausted: no balanced split was found."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


def make_rng(seed: int) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class ChainConfig:
    steps: int
    epsilon: float = 0.02
    seed: int = 0
    max_tree_retries: int = 100
    max_pair_retries: int = 100
    thinning: int = 1

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        for name in ("max_tree_retries", "max_pair_retries", "thinning"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.steps and self.thinning > self.steps:
            raise ValueError("thinning cannot exceed steps")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SpanningTree:
    """A rooted spanning tree over graph node indices.

    ``order`` lists nodes root first, each node after its parent.
    """

    nodes: frozenset[int]
    root: int
    parent: Mapping[int, int]
    children: Mapping[int, tuple[int, ...]]
    order: tuple[int, ...]
    pop: Mapping[int, int]
    subtree_pop: Mapping[int, int]

    @classmethod
    def from_edges(
        cls,
        nodes: Iterable[int],
        edges: Iterable[tuple[int, int]],
        pop: Mapping[int, int] | Sequence[int],
        root: int | None = None,
    ) -> "SpanningTree":
        nodes = sorted(nodes)
        adj: dict[int, list[int]] = {v: [] for v in nodes}
        n_edges = 0
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
            n_edges += 1
        if n_edges != len(nodes) - 1:
            raise GraphDataError(f"a tree on {len(nodes)} nodes needs {len(nodes) - 1} edges")
        root = nodes[0] if root is None else root
        parent = {}
        children: dict[int, list[int]] = {v: [] for v in nodes}
        order = [root]
        seen = {root}
        for u in order:
            for v in sorted(adj[u]):
                if v not in seen:
                    seen.add(v)
                    parent[v] = u
                    children[u].append(v)
                    order.append(v)
        if len(order) != len(nodes):
            raise GraphDataError("edges do not connect every node")
        node_pop = {v: pop[v] for v in nodes}
        sub = dict(node_pop)
        for v in reversed(order[1:]):
            sub[parent[v]] += sub[v]
        return cls(
            frozenset(nodes),
            root,
            parent,
            {v: tuple(c) for v, c in children.items()},
            tuple(order),
            node_pop,
            sub,
        )

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(v, self.parent[v]) for v in self.order[1:]]

    def subtree_nodes(self, v: int) -> list[int]:
        out = [v]
        for u in out:
            out.extend(self.children[u])
        return out


def random_spanning_tree(
    g: DualGraph, node_subset: Iterable[int], rng: np.random.Generator
) -> SpanningTree:
    """Minimum spanning tree of the induced subgraph under uniform(0, 1) edge weights."""
    nodes = sorted(set(node_subset))
    inside = set(nodes)
    edges = [(u, v) for u, v in g.edges if u in inside and v in inside]
    weights = rng.random(len(edges))

    parent = {v: v for v in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for e in np.argsort(weights, kind="stable"):
        u, v = edges[e]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            tree.append((u, v))
            if len(tree) == len(nodes) - 1:
                break
    if len(tree) != len(nodes) - 1:
        raise GraphDataError("node subset induces a disconnected subgraph")
    pops = g.populations()
    return SpanningTree.from_edges(nodes, tree, pops)


def balanced_cut_edges(t: SpanningTree, ideal, epsilon: float) -> list[tuple[int, int]]:
    """Tree edges ``(child, parent)`` whose removal leaves both sides within tolerance."""
    lo, hi = population_bounds(ideal, epsilon)
    total = t.subtree_pop[t.root]
    cuts = []
    for v in t.order[1:]:
        below = t.subtree_pop[v]
        if lo <= below <= hi and lo <= total - below <= hi:
            cuts.append((v, t.parent[v]))
    return cuts


@dataclass
class ChainStats:
    tree_retries: int = 0
    pair_retries: int = 0


def adjacent_district_pairs(g: DualGraph, a: Assignment) -> list[tuple[int, int]]:
    labels = a.labels
    pairs = set()
    for u, v in g.edges:
        du, dv = labels[u], labels[v]
        if du != dv:
            pairs.add((du, dv) if du < dv else (dv, du))
    return sorted(pairs)


def recom_step(
    g: DualGraph,
    a: Assignment,
    cfg: ChainConfig,
    rng: np.random.Generator,
    stats: ChainStats | None = None,
) -> Assignment:
    """Merge two adjacent districts and re-split them along a balanced tree cut."""
    stats = stats if stats is not None else ChainStats()
    pairs = adjacent_district_pairs(g, a)
    if not pairs:
        raise InfeasibleError("plan has no pair of adjacent districts to recombine")
    ideal = Fraction(g.total_population(), a.k)
    for _ in range(cfg.max_pair_retries):
        d1, d2 = pairs[rng.integers(len(pairs))]
        region = [i for i, d in enumerate(a.labels) if d == d1 or d == d2]
        for _ in range(cfg.max_tree_retries):
            tree = random_spanning_tree(g, region, rng)
            cuts = balanced_cut_edges(tree, ideal, cfg.epsilon)
            if cuts:
                v, _ = cuts[rng.integers(len(cuts))]
                first, second = (d1, d2) if rng.integers(2) else (d2, d1)
                labels = list(a.labels)
                for i in region:
                    labels[i] = second
                for i in tree.subtree_nodes(v):
                    labels[i] = first
                return Assignment(g, labels)
            stats.tree_retries += 1
        stats.pair_retries += 1
    raise InfeasibleError(
        f"no balanced cut after {cfg.max_pair_retries} district pairs "
        f"x {cfg.max_tree_retries} trees"
    )


def seed_plan(
    g: DualGraph,
    k: int,
    epsilon: float,
    rng: np.random.Generator,
    max_tree_retries: int = 100,
    max_restarts: int = 100,
) -> Assignment:
    """Build a legal starting plan by recursively splitting off one district at a time.

    Each split draws a random spanning tree of the unassigned region and cuts
    an edge so that one side is a district of ideal size and the other side
    can still hold the remaining districts.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = len(g)
    if k > n:
        raise InfeasibleError(f"cannot make {k} districts from {n} nodes")
    if not g.is_connected():
        raise GraphDataError("graph is not connected")
    if k == 1:
        return Assignment(g, [1] * n)
    lo, hi = population_bounds(Fraction(g.total_population(), k), epsilon)
    for _ in range(max_restarts):
        labels = [k] * n
        remaining = list(range(n))
        for d in range(1, k):
            rest_lo, rest_hi = (k - d) * lo, (k - d) * hi
            part = None
            for _ in range(max_tree_retries):
                tree = random_spanning_tree(g, remaining, rng)
                total = tree.subtree_pop[tree.root]
                candidates = []
                for v in tree.order[1:]:
                    below = tree.subtree_pop[v]
                    if lo <= below <= hi and rest_lo <= total - below <= rest_hi:
                        candidates.append((v, True))
                    if lo <= total - below <= hi and rest_lo <= below <= rest_hi:
                        candidates.append((v, False))
                if candidates:
                    v, take_subtree = candidates[rng.integers(len(candidates))]
                    below = set(tree.subtree_nodes(v))
                    part = below if take_subtree else set(remaining) - below
                    break
            if part is None:
                break
            for i in part:
                labels[i] = d
            remaining = [i for i in remaining if i not in part]
        else:
            return Assignment(g, labels)
    raise InfeasibleError(f"could not seed a {k}-district plan within epsilon={epsilon}")


@dataclass
class RunSummary:
    steps: int
    emitted: int
    tree_retries: int
    pair_retries: int
    distinct_plans: int
    seed: int
    rng: str = RNG_ALGORITHM
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "steps": self.steps,
            "emitted": self.emitted,
            "tree_retries": self.tree_retries,
            "pair_retries": self.pair_retries,
            "distinct_plans": self.distinct_plans,
            "seed": self.seed,
            "rng": self.rng,
        }
        out.update(self.extra)
        return out


def run_chain(
    g: DualGraph,
    a0: Assignment,
    cfg: ChainConfig,
    sink: Callable[[int, Assignment], None],
    rng: np.random.Generator | None = None,
) -> RunSummary:
    """Run ``cfg.steps`` ReCom steps from ``a0``, passing every ``thinning``-th plan to ``sink``.

    ``a0`` is delivered as step 0. Every step's proposal is accepted.
    """
    if not is_legal(g, a0, LegalityConfig(cfg.epsilon)):
        raise ValueError("initial plan is not contiguous and within epsilon")
    rng = make_rng(cfg.seed) if rng is None else rng
    stats = ChainStats()
    seen = {hash(a0.labels)}
    sink(0, a0)
    emitted = 1
    a = a0
    for step in range(1, cfg.steps + 1):
        try:
            a = recom_step(g, a, cfg, rng, stats)
        except InfeasibleError as exc:
            raise InfeasibleError(str(exc), step=step) from None
        seen.add(hash(a.labels))
        if step % cfg.thinning == 0:
            sink(step, a)
            emitted += 1
    return RunSummary(
        steps=cfg.steps,
        emitted=emitted,
        tree_retries=stats.tree_retries,
        pair_retries=stats.pair_retries,
        distinct_plans=len(seen),
        seed=cfg.seed,
    )
