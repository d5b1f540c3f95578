import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hypermux.geometry import DiskParams
from hypermux.graph import UGraph
from hypermux.rhg import generate

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def clique_ring(k, size, bridges=1):
    """``k`` cliques of ``size`` nodes, consecutive cliques joined by single links."""
    edges = []
    for c in range(k):
        b = size * c
        edges += [(b + i, b + j) for i in range(size) for j in range(i + 1, size)]
        if k > 1:
            edges.append((b + size - 1, (b + size) % (k * size)))
    return UGraph(k * size, edges)


def disjoint_cliques(k, size):
    edges = []
    for c in range(k):
        b = size * c
        edges += [(b + i, b + j) for i in range(size) for j in range(i + 1, size)]
    return UGraph(k * size, edges)


def random_graph(n, p, rng):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return UGraph(n, np.column_stack([iu[keep], ju[keep]]))


def rhg_without_isolates(n, alpha, C, T, seed):
    """Sample, then drop zero-degree nodes; returns (graph, params, r, theta)."""
    s = generate(DiskParams(n, alpha, C, T), seed)
    keep = np.flatnonzero(s.graph.degrees > 0)
    idx = -np.ones(n, dtype=np.int64)
    idx[keep] = np.arange(len(keep))
    g = UGraph(len(keep), idx[s.graph.edges()])
    return g, DiskParams(len(keep), alpha, C, T), s.r[keep], s.theta[keep]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Records one PASS/FAIL line per acceptance criterion, printed in the terminal summary."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
