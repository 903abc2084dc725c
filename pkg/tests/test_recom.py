import random
from collections import Counter

import numpy as np
import pytest

from recom_ensemble.graph import DualGraph, GraphDataError, NodeRecord, grid_graph
from recom_ensemble.partition import Assignment, is_contiguous, population_deviation
from recom_ensemble.recom import (
    ChainConfig,
    InfeasibleError,
    SpanningTree,
    balanced_cut_edges,
    make_rng,
    random_spanning_tree,
    recom_step,
    run_chain,
    seed_plan,
)

from .conftest import path_graph
from .oracles import adjacency, bfs_connected, brute_force_cuts, enumerate_bipartitions, enumerate_partitions


def assert_valid_tree(g, tree, nodes):
    nodes = set(nodes)
    assert tree.nodes == nodes
    assert len(tree.edges) == len(nodes) - 1
    graph_edges = {frozenset(e) for e in g.edges}
    assert all(frozenset(e) in graph_edges for e in tree.edges)
    adj = {v: set() for v in nodes}
    for u, v in tree.edges:
        adj[u].add(v)
        adj[v].add(u)
    assert bfs_connected(adj, nodes)
    assert tree.subtree_pop[tree.root] == sum(g.nodes[v].population for v in nodes)


def test_two_node_tree_is_the_edge():
    g = path_graph([5, 5])
    rng = make_rng(0)
    for _ in range(5):
        tree = random_spanning_tree(g, [0, 1], rng)
        assert tree.edges == [(1, 0)]


def test_triangle_trees_roughly_uniform(triangle):
    rng = make_rng(11)
    counts = Counter(
        frozenset(frozenset(e) for e in random_spanning_tree(triangle, [0, 1, 2], rng).edges)
        for _ in range(3000)
    )
    assert len(counts) == 3
    for c in counts.values():
        # 3 sigma at n=3000 is about 0.026
        assert abs(c / 3000 - 1 / 3) < 0.03


def test_triangle_trees_uniform_at_large_n(triangle):
    n = 100_000
    rng = make_rng(2024)
    counts = Counter(
        frozenset(frozenset(e) for e in random_spanning_tree(triangle, [0, 1, 2], rng).edges)
        for _ in range(n)
    )
    # sigma is about 0.0015 at this n; 0.006 is four sigma.
    assert all(abs(c / n - 1 / 3) < 0.006 for c in counts.values())


def test_grid_tree_invariants_and_determinism(grid4):
    a = random_spanning_tree(grid4, range(16), make_rng(5))
    b = random_spanning_tree(grid4, range(16), make_rng(5))
    assert_valid_tree(grid4, a, range(16))
    assert a.edges == b.edges


def test_tree_on_subset(grid4):
    subset = [grid4.index[f"{r},{c}"] for r in range(2) for c in range(4)]
    rng = make_rng(1)
    for _ in range(20):
        assert_valid_tree(grid4, random_spanning_tree(grid4, subset, rng), subset)


def test_tree_rejects_disconnected_subset(grid4):
    with pytest.raises(GraphDataError):
        random_spanning_tree(grid4, [grid4.index["0,0"], grid4.index["3,3"]], make_rng(0))


def test_cut_path_of_four():
    tree = SpanningTree.from_edges(range(4), [(0, 1), (1, 2), (2, 3)], [1, 1, 1, 1])
    cuts = balanced_cut_edges(tree, 2, 0.0)
    assert [frozenset(e) for e in cuts] == [frozenset((1, 2))]


def test_cut_star_has_none():
    tree = SpanningTree.from_edges(range(5), [(0, i) for i in range(1, 5)], [1] * 5)
    assert balanced_cut_edges(tree, 2.5, 0.1) == []


def random_tree(rnd, n):
    # Random labelled tree: attach each new node to a uniformly chosen earlier one.
    order = list(range(n))
    rnd.shuffle(order)
    return [(order[i], order[rnd.randrange(i)]) for i in range(1, n)]


@pytest.mark.parametrize("seed", range(40))
def test_cut_matches_brute_force(seed):
    rnd = random.Random(seed)
    n = rnd.randint(2, 12)
    edges = random_tree(rnd, n)
    pops = [rnd.randint(0, 20) for _ in range(n)]
    total = sum(pops) or 1
    ideal = total / 2
    eps = rnd.choice([0.0, 0.05, 0.1, 0.3])
    tree = SpanningTree.from_edges(range(n), edges, pops, root=rnd.randrange(n))
    got = {frozenset(e) for e in balanced_cut_edges(tree, ideal, eps)}
    assert got == brute_force_cuts(list(range(n)), edges, pops, ideal, eps)


def test_seed_plan_k1(grid4):
    a = seed_plan(grid4, 1, 0.0, make_rng(0))
    assert set(a.labels) == {1}


def test_seed_plan_grid_exact(grid4):
    adj = adjacency(grid4)
    for seed in range(10):
        a = seed_plan(grid4, 2, 0.0, make_rng(seed))
        assert a.district_pops == {1: 8, 2: 8}
        for d in (1, 2):
            assert bfs_connected(adj, a.members(d))


def test_seed_plan_two_nodes():
    g = path_graph([5, 5])
    a = seed_plan(g, 2, 0.0, make_rng(3))
    assert a.canonical() == (1, 2)


@pytest.mark.parametrize("k", [3, 4, 5])
def test_seed_plan_many_districts(k):
    g = grid_graph(10, 10)
    a = seed_plan(g, k, 0.05, make_rng(k))
    assert a.k == k
    assert population_deviation(g, a) <= 0.05
    assert all(is_contiguous(g, a).values())


def test_seed_plan_infeasible():
    g = path_graph([1, 1, 10])
    with pytest.raises(InfeasibleError):
        seed_plan(g, 2, 0.0, make_rng(0), max_tree_retries=3, max_restarts=3)


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(steps=-1)
    with pytest.raises(ValueError):
        ChainConfig(steps=5, thinning=6)
    with pytest.raises(ValueError):
        ChainConfig(steps=5, max_tree_retries=0)
    with pytest.raises(ValueError):
        ChainConfig(steps=5, seed=2**64)
    ChainConfig(steps=0)


def test_k2_step_resplits_whole_graph(grid4):
    rng = make_rng(2)
    a = seed_plan(grid4, 2, 0.0, rng)
    plans = enumerate_bipartitions(grid4)
    cfg = ChainConfig(steps=1, epsilon=0.0)
    for _ in range(200):
        a = recom_step(grid4, a, cfg, rng)
        assert a.canonical() in plans


def test_step_keeps_other_districts(grid3):
    rng = make_rng(4)
    a = seed_plan(grid3, 3, 0.0, rng)
    cfg = ChainConfig(steps=1, epsilon=0.0)
    for _ in range(100):
        b = recom_step(grid3, a, cfg, rng)
        changed = {d for x, y in zip(a.labels, b.labels) for d in (x, y) if x != y}
        assert len(changed) <= 2
        assert sorted(b.district_pops.values()) == [3, 3, 3]
        a = b


def test_run_chain_zero_steps(grid4):
    a0 = seed_plan(grid4, 2, 0.0, make_rng(0))
    got = []
    summary = run_chain(grid4, a0, ChainConfig(steps=0, epsilon=0.0), lambda s, a: got.append((s, a)))
    assert got == [(0, a0)]
    assert summary.emitted == 1


def test_run_chain_legality_and_mixing(grid4):
    a0 = seed_plan(grid4, 2, 0.0, make_rng(0))
    plans = []
    summary = run_chain(grid4, a0, ChainConfig(steps=1000, epsilon=0.0, seed=9), lambda s, a: plans.append(a))
    assert len(plans) == 1001
    assert len({p.labels for p in plans}) >= 2
    assert summary.distinct_plans == len({p.labels for p in plans})
    for p in plans:
        assert all(is_contiguous(grid4, p).values())
        assert population_deviation(grid4, p) == 0.0


def test_run_chain_deterministic():
    g = grid_graph(6, 6)
    a0 = seed_plan(g, 3, 0.05, make_rng(1))

    def run():
        out = []
        run_chain(g, a0, ChainConfig(steps=300, epsilon=0.05, seed=77), lambda s, a: out.append((s, a.labels)))
        return out

    assert run() == run()


def test_run_chain_thinning(grid4):
    a0 = seed_plan(grid4, 2, 0.0, make_rng(0))
    steps = []
    run_chain(grid4, a0, ChainConfig(steps=10, epsilon=0.0, thinning=3), lambda s, a: steps.append(s))
    assert steps == [0, 3, 6, 9]


def test_run_chain_rejects_illegal_start(grid4):
    labels = [1] * 9 + [2] * 7
    with pytest.raises(ValueError):
        run_chain(grid4, Assignment(grid4, labels), ChainConfig(steps=1, epsilon=0.0), lambda s, a: None)


def test_retry_exhaustion_reports_step():
    g = grid_graph(10, 10)
    a0 = seed_plan(g, 2, 0.0, make_rng(0))
    cfg = ChainConfig(steps=1000, epsilon=0.0, max_tree_retries=1, max_pair_retries=1)
    with pytest.raises(InfeasibleError) as info:
        run_chain(g, a0, cfg, lambda s, a: None)
    assert info.value.step >= 1
    assert f"step {info.value.step}" in str(info.value)


def test_single_district_has_no_step(grid4):
    with pytest.raises(InfeasibleError):
        recom_step(grid4, Assignment(grid4, [1] * 16), ChainConfig(steps=1), make_rng(0))


def test_three_by_three_three_districts(grid3):
    oracle = enumerate_partitions(grid3, 3, 0.0)
    a0 = seed_plan(grid3, 3, 0.0, make_rng(0))
    seen = set()
    run_chain(grid3, a0, ChainConfig(steps=20000, epsilon=0.0, seed=3), lambda s, a: seen.add(a.canonical()))
    assert seen <= oracle
    # The chain reaches every enumerated plan on this fixture.
    assert seen == oracle


def test_rng_is_pcg64():
    rng = make_rng(123)
    assert isinstance(rng.bit_generator, np.random.PCG64)
    with pytest.raises(ValueError):
        make_rng(-1)
