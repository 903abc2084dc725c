import pytest

from recom_ensemble.graph import DualGraph, NodeRecord, grid_graph


@pytest.fixture
def grid4():
    return grid_graph(4, 4)


@pytest.fixture
def grid3():
    return grid_graph(3, 3)


@pytest.fixture
def triangle():
    return DualGraph([NodeRecord(x, 1) for x in "abc"], [("a", "b"), ("b", "c"), ("a", "c")])


def path_graph(pops, ids=None):
    ids = ids or [chr(ord("a") + i) for i in range(len(pops))]
    nodes = [NodeRecord(i, p) for i, p in zip(ids, pops)]
    return DualGraph(nodes, list(zip(ids, ids[1:])))


@pytest.fixture
def voting_grid():
    """4x4 grid with D strength rising left to right and county per 2x2 block."""
    base = grid_graph(4, 4, county=lambda r, c: f"C{r // 2}{c // 2}")
    nodes = []
    for n in base.nodes:
        r, c = map(int, n.id.split(","))
        nodes.append(
            NodeRecord(n.id, 1, n.county, {"sen": {"D": 20 + 20 * c, "R": 80 - 20 * c + r, "I": c}})
        )
    return DualGraph(nodes, base.edge_ids())


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("tests.test_acceptance")
    if module and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.RESULTS):
            terminalreporter.write_line(line)
