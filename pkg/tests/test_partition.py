from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from recom_ensemble.graph import DualGraph, GraphDataError, NodeRecord, grid_graph
from recom_ensemble.partition import (
    Assignment,
    LegalityConfig,
    county_splits,
    is_contiguous,
    is_legal,
    population_bounds,
    population_deviation,
)

from .oracles import adjacency, bfs_connected


def halves(g, cols=4):
    return Assignment(g, [1 if int(n.id.split(",")[1]) < cols // 2 else 2 for n in g.nodes])


def test_assignment_cache_and_errors(grid4):
    a = halves(grid4)
    assert a.k == 2
    assert a.district_pops == {1: 8, 2: 8}
    with pytest.raises(GraphDataError, match="empty"):
        Assignment(grid4, [1] * 15 + [3])
    with pytest.raises(GraphDataError):
        Assignment(grid4, [1] * 15)
    with pytest.raises(GraphDataError, match="does not assign"):
        Assignment.from_mapping(grid4, {"0,0": 1})


def test_plan_mapping_round_trip(grid4):
    a = halves(grid4)
    assert Assignment.from_mapping(grid4, a.plan) == a


def test_contiguous_halves(grid4):
    assert is_contiguous(grid4, halves(grid4)) == {1: True, 2: True}


def test_diagonal_cells_not_contiguous(grid4):
    labels = [2] * 16
    labels[grid4.index["0,0"]] = 1
    labels[grid4.index["1,1"]] = 1
    result = is_contiguous(grid4, Assignment(grid4, labels))
    assert result[1] is False


def test_population_deviation(grid4):
    assert population_deviation(grid4, halves(grid4)) == 0.0
    labels = list(halves(grid4).labels)
    labels[grid4.index["0,2"]] = 1
    assert population_deviation(grid4, Assignment(grid4, labels)) == 0.125


def test_population_bounds_match_deviation():
    # Any integer inside the bounds must report a deviation <= epsilon.
    for total, k, eps in [(100, 2, 0.02), (1001, 3, 0.01), (16, 2, 0.0), (7, 2, 0.1)]:
        lo, hi = population_bounds(Fraction(total, k), eps)
        ideal = total / k
        for pop in range(lo, hi + 1):
            assert abs(pop - ideal) / ideal <= eps + 1e-15
        assert abs(lo - 1 - ideal) / ideal > eps
        assert abs(hi + 1 - ideal) / ideal > eps


def test_legality_config_bounds():
    with pytest.raises(ValueError):
        LegalityConfig(epsilon=1.0)
    with pytest.raises(ValueError):
        LegalityConfig(epsilon=-0.1)


def test_is_legal(grid4):
    assert is_legal(grid4, halves(grid4), LegalityConfig(0.0))


def test_county_splits_aligned():
    g = grid_graph(4, 4, county=lambda r, c: "W" if c < 2 else "E")
    report = county_splits(g, halves(g))
    assert (report.split_counties, report.total_splits) == (0, 0)


def test_county_splits_one_straddler():
    nodes = [NodeRecord(str(i), 1, c) for i, c in enumerate("AABBBCC")]
    g = DualGraph(nodes, [(str(i), str(i + 1)) for i in range(6)])
    a = Assignment(g, [1, 1, 1, 1, 2, 2, 2])
    report = county_splits(g, a)
    assert (report.split_counties, report.total_splits) == (1, 1)


def test_county_splits_three_pieces():
    nodes = [NodeRecord(str(i), 1, "A" if i < 6 else "B") for i in range(7)]
    g = DualGraph(nodes, [(str(i), str(i + 1)) for i in range(6)])
    a = Assignment(g, [1, 1, 2, 2, 3, 3, 3])
    report = county_splits(g, a)
    assert (report.split_counties, report.total_splits) == (1, 2)


def test_county_splits_missing_tag(grid4):
    with pytest.raises(GraphDataError, match="0,0"):
        county_splits(grid4, halves(grid4))


@given(st.lists(st.integers(1, 3), min_size=16, max_size=16), st.permutations([1, 2, 3]))
def test_relabel_invariance(labels, perm):
    g = grid_graph(4, 4, county=lambda r, c: f"{r // 2}{c // 2}")
    if len(set(labels)) != 3:
        labels = [1, 2, 3] + labels[3:]
    a = Assignment(g, labels)
    b = Assignment(g, [perm[d - 1] for d in labels])
    assert county_splits(g, a) == county_splits(g, b)
    assert population_deviation(g, a) == population_deviation(g, b)
    assert sorted(is_contiguous(g, a).values()) == sorted(is_contiguous(g, b).values())
    assert a.canonical() == b.canonical()
    # Cache coherence against a brute-force recount.
    for d, pop in b.district_pops.items():
        assert pop == sum(n.population for n, x in zip(g.nodes, b.labels) if x == d)
    adj = adjacency(g)
    for d, ok in is_contiguous(g, a).items():
        assert ok == bfs_connected(adj, [i for i, x in enumerate(labels) if x == d])
