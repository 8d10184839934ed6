from pathlib import Path

import numpy as np
import pytest

from simembed.graph import Graph, from_pairs, load_edge_list

DATA = Path(__file__).parent / "data"

# (criterion number, description, passed, detail) appended by the acceptance tests
ACCEPTANCE_LINES: list = []


def clique_pairs(size, offset=0):
    return [(a + offset, b + offset) for a in range(size) for b in range(size) if a != b]


def two_cliques(size=10, bridge=True) -> Graph:
    pairs = clique_pairs(size) + clique_pairs(size, size)
    if bridge:
        pairs += [(0, size), (size, 0)]
    return from_pairs(pairs, 2 * size)


def random_digraph(n, p, rng) -> Graph:
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    return Graph.from_edges(src, dst, n)


@pytest.fixture(scope="session")
def karate() -> Graph:
    return load_edge_list(DATA / "karate.edges", symmetrize=True)


@pytest.fixture(scope="session")
def karate_path() -> Path:
    return DATA / "karate.edges"


@pytest.fixture
def cliques() -> Graph:
    return two_cliques()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        terminalreporter.write_line(f"[{status}] criterion {number}: {name} ({detail})")
