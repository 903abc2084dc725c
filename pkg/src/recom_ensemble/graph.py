"""Precinct dual graph: model, JSON loading, validation and data cleaning."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping


class GraphDataError(ValueError):
    """Raised when graph or tally data violates the model's invariants."""


@dataclass(frozen=True)
class NodeRecord:
    id: str
    population: int
    county: str | None = None
    tallies: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.id, str):
            raise GraphDataError(f"node id must be a string, got {self.id!r}")
        if isinstance(self.population, bool) or not isinstance(self.population, int):
            raise GraphDataError(f"node {self.id!r}: population must be an integer")
        if self.population < 0:
            raise GraphDataError(f"node {self.id!r}: negative population {self.population}")
        frozen = {}
        for contest, parties in self.tallies.items():
            counts = {}
            for party, votes in parties.items():
                if isinstance(votes, bool) or not isinstance(votes, int):
                    raise GraphDataError(
                        f"node {self.id!r}: votes for {party!r} in {contest!r} must be an integer"
                    )
                if votes < 0:
                    raise GraphDataError(
                        f"node {self.id!r}: negative votes {votes} for {party!r} in {contest!r}"
                    )
                counts[party] = votes
            frozen[contest] = MappingProxyType(counts)
        object.__setattr__(self, "tallies", MappingProxyType(frozen))


@dataclass(frozen=True)
class ElectionTallies:
    """Vote counts for one contest, keyed by node id then party label."""

    contest: str
    votes: Mapping[str, Mapping[str, int]]

    def __post_init__(self):
        object.__setattr__(
            self,
            "votes",
            MappingProxyType({n: MappingProxyType(dict(p)) for n, p in self.votes.items()}),
        )

    def parties(self) -> list[str]:
        seen = {}
        for counts in self.votes.values():
            for party in counts:
                seen.setdefault(party, None)
        return list(seen)

    def total(self, party: str) -> int:
        return sum(counts.get(party, 0) for counts in self.votes.values())


class DualGraph:
    """Immutable adjacency graph of population units.

    Nodes keep the order they were given in; that order is the canonical
    index used by every compact assignment vector. Edges are stored as
    sorted ``(i, j)`` index pairs with ``i < j``.
    """

    __slots__ = ("_nodes", "_index", "_edges", "_adjacency")

    def __init__(self, nodes: Iterable[NodeRecord], edges: Iterable[tuple[str, str]]):
        nodes = tuple(nodes)
        index: dict[str, int] = {}
        for i, node in enumerate(nodes):
            if node.id in index:
                raise GraphDataError(f"duplicate node id {node.id!r}")
            index[node.id] = i
        pairs = set()
        for edge in edges:
            edge = tuple(edge)
            if len(edge) != 2:
                raise GraphDataError(f"edge {list(edge)!r} must have exactly two endpoints")
            u, v = edge
            for end in (u, v):
                if end not in index:
                    raise GraphDataError(f"edge {[u, v]!r} references unknown node {end!r}")
            if u == v:
                raise GraphDataError(f"self-loop on node {u!r}")
            i, j = sorted((index[u], index[v]))
            if (i, j) in pairs:
                raise GraphDataError(f"duplicate edge {[u, v]!r}")
            pairs.add((i, j))
        adjacency: list[list[int]] = [[] for _ in nodes]
        for i, j in sorted(pairs):
            adjacency[i].append(j)
            adjacency[j].append(i)
        self._nodes = nodes
        self._index = MappingProxyType(index)
        self._edges = tuple(sorted(pairs))
        self._adjacency = tuple(tuple(sorted(a)) for a in adjacency)

    @property
    def nodes(self) -> tuple[NodeRecord, ...]:
        return self._nodes

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    @property
    def index(self) -> Mapping[str, int]:
        return self._index

    def __len__(self) -> int:
        return len(self._nodes)

    def node_ids(self) -> list[str]:
        return [n.id for n in self._nodes]

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adjacency[i]

    def populations(self) -> list[int]:
        return [n.population for n in self._nodes]

    def total_population(self) -> int:
        return sum(n.population for n in self._nodes)

    def contests(self) -> list[str]:
        seen = {}
        for node in self._nodes:
            for contest in node.tallies:
                seen.setdefault(contest, None)
        return sorted(seen)

    def edge_ids(self) -> list[tuple[str, str]]:
        return [(self._nodes[i].id, self._nodes[j].id) for i, j in self._edges]

    def tallies(self, contest: str) -> ElectionTallies:
        """Collect one contest's tallies from the node records (absent nodes are omitted)."""
        votes = {n.id: n.tallies[contest] for n in self._nodes if contest in n.tallies}
        return ElectionTallies(contest, votes)

    def components(self, subset: Iterable[int] | None = None) -> list[list[int]]:
        """Connected components of the graph, or of the subgraph induced by ``subset``."""
        allowed = set(range(len(self._nodes))) if subset is None else set(subset)
        seen: set[int] = set()
        out = []
        for start in sorted(allowed):
            if start in seen:
                continue
            seen.add(start)
            comp = [start]
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for v in self._adjacency[u]:
                    if v in allowed and v not in seen:
                        seen.add(v)
                        comp.append(v)
                        queue.append(v)
            out.append(sorted(comp))
        return out

    def is_connected(self, subset: Iterable[int] | None = None) -> bool:
        return len(self.components(subset)) <= 1

    def to_dict(self) -> dict:
        nodes = []
        for n in self._nodes:
            tallies = {
                contest: {party: n.tallies[contest][party] for party in sorted(n.tallies[contest])}
                for contest in sorted(n.tallies)
            }
            nodes.append({"id": n.id, "pop": n.population, "county": n.county, "tallies": tallies})
        edges = sorted(sorted(pair) for pair in self.edge_ids())
        return {"nodes": nodes, "edges": edges}

    def __repr__(self) -> str:
        return f"DualGraph(nodes={len(self._nodes)}, edges={len(self._edges)})"


def graph_from_dict(data: Mapping) -> DualGraph:
    if not isinstance(data, Mapping) or "nodes" not in data or "edges" not in data:
        raise GraphDataError('graph JSON must be an object with "nodes" and "edges"')
    nodes = []
    for pos, raw in enumerate(data["nodes"]):
        try:
            node_id = raw["id"]
            pop = raw["pop"]
        except (KeyError, TypeError) as exc:
            raise GraphDataError(f"node #{pos}: missing field {exc}") from None
        county = raw.get("county")
        if county is not None and not isinstance(county, str):
            raise GraphDataError(f"node {node_id!r}: county must be a string or null")
        nodes.append(NodeRecord(node_id, pop, county, raw.get("tallies") or {}))
    return DualGraph(nodes, data["edges"])


def load_graph(path: str | Path) -> DualGraph:
    """Read a graph from the JSON interchange format."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GraphDataError(f"{path}: invalid JSON ({exc})") from None
    return graph_from_dict(data)


def dumps_graph(g: DualGraph) -> str:
    """Canonical serialization: input node order, sorted edges and keys."""
    return json.dumps(g.to_dict(), indent=1, ensure_ascii=False) + "\n"


def save_graph(g: DualGraph, path: str | Path) -> None:
    Path(path).write_text(dumps_graph(g), encoding="utf-8")


@dataclass(frozen=True)
class ValidationReport:
    connected: bool
    components: list[list[str]]
    zero_population: int
    missing_county: list[str]
    missing_tallies: dict[str, list[str]]

    def to_dict(self) -> dict:
        return {
            "connected": self.connected,
            "components": self.components,
            "zero_population": self.zero_population,
            "missing_county": self.missing_county,
            "missing_tallies": self.missing_tallies,
        }


def validate_graph(g: DualGraph) -> ValidationReport:
    ids = g.node_ids()
    comps = [[ids[i] for i in comp] for comp in g.components()]
    missing_tallies = {}
    for contest in g.contests():
        missing = [n.id for n in g.nodes if contest not in n.tallies]
        if missing:
            missing_tallies[contest] = missing
    return ValidationReport(
        connected=len(comps) <= 1,
        components=comps,
        zero_population=sum(1 for n in g.nodes if n.population == 0),
        missing_county=[n.id for n in g.nodes if n.county is None],
        missing_tallies=missing_tallies,
    )


def merge_nodes(g: DualGraph, ids: Iterable[str], new_id: str) -> DualGraph:
    """Replace a connected set of nodes by one node carrying their summed data.

    The merged node takes the position of the earliest member. Its county is
    kept when all members agree and set to ``None`` otherwise.
    """
    ids = set(ids)
    if not ids:
        raise GraphDataError("merge set is empty")
    for node_id in ids:
        if node_id not in g.index:
            raise GraphDataError(f"merge references unknown node {node_id!r}")
    if new_id in g.index and new_id not in ids:
        raise GraphDataError(f"new id {new_id!r} collides with an existing node")
    members = sorted(g.index[i] for i in ids)
    if not g.is_connected(members):
        raise GraphDataError(f"merge set {sorted(ids)!r} is not connected")

    records = [g.nodes[i] for i in members]
    counties = {r.county for r in records}
    tallies: dict[str, dict[str, int]] = {}
    for r in records:
        for contest, parties in r.tallies.items():
            bucket = tallies.setdefault(contest, {})
            for party, votes in parties.items():
                bucket[party] = bucket.get(party, 0) + votes
    merged = NodeRecord(
        new_id,
        sum(r.population for r in records),
        counties.pop() if len(counties) == 1 else None,
        tallies,
    )

    first = members[0]
    nodes = []
    for i, node in enumerate(g.nodes):
        if i == first:
            nodes.append(merged)
        elif node.id not in ids:
            nodes.append(node)
    edges = set()
    for u, v in g.edge_ids():
        u = new_id if u in ids else u
        v = new_id if v in ids else v
        if u != v:
            edges.add(tuple(sorted((u, v))))
    return DualGraph(nodes, sorted(edges))


def zero_fill(t: ElectionTallies, g: DualGraph) -> ElectionTallies:
    """Give every node of ``g`` an entry, all-zero where the source had none."""
    parties = t.parties()
    votes = {}
    for node_id in g.node_ids():
        if node_id in t.votes:
            votes[node_id] = t.votes[node_id]
        else:
            votes[node_id] = {p: 0 for p in parties}
    return ElectionTallies(t.contest, votes)


def with_tallies(g: DualGraph, t: ElectionTallies) -> DualGraph:
    """Return a copy of ``g`` whose nodes carry ``t`` as their entry for its contest."""
    nodes = []
    for n in g.nodes:
        tallies = {c: dict(p) for c, p in n.tallies.items()}
        if n.id in t.votes:
            tallies[t.contest] = dict(t.votes[n.id])
        else:
            tallies.pop(t.contest, None)
        nodes.append(NodeRecord(n.id, n.population, n.county, tallies))
    return DualGraph(nodes, g.edge_ids())


def apply_cleaning(g: DualGraph, directives: Iterable[Mapping]) -> DualGraph:
    """Run explicit merge / zero_fill directives in order."""
    for pos, d in enumerate(directives):
        op = d.get("op")
        if op == "merge":
            g = merge_nodes(g, d["ids"], d["new_id"])
        elif op == "zero_fill":
            g = with_tallies(g, zero_fill(g.tallies(d["contest"]), g))
        else:
            raise GraphDataError(f"cleaning directive #{pos}: unknown op {op!r}")
    return g


def load_cleaning_script(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            directives = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphDataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(directives, list):
        raise GraphDataError(f"{path}: cleaning script must be a JSON array")
    return directives


def grid_graph(rows: int, cols: int, pop: int = 1, county=None) -> DualGraph:
    """Unit-population lattice used as a fixture throughout the tests and docs.

    Node ids are ``"r,c"`` in row-major order. ``county`` may be a callable
    ``(r, c) -> str`` to tag nodes.
    """
    nodes = []
    for r in range(rows):
        for c in range(cols):
            tag = county(r, c) if callable(county) else county
            nodes.append(NodeRecord(f"{r},{c}", pop, tag))
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((f"{r},{c}", f"{r},{c + 1}"))
            if r + 1 < rows:
                edges.append((f"{r},{c}", f"{r + 1},{c}"))
    return DualGraph(nodes, edges)
