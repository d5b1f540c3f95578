import itertools
import math
import warnings

import numpy as np
import scipy.sparse as sp
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypermux.graph import UGraph
from hypermux.mapeq import (
    FlowGraph,
    MapEquationState,
    OptimizerOptions,
    Partition,
    balance_diagnostic,
    codelength,
    coherence,
    entropy_bits,
    expanded_codelength,
    flow_codelength,
    module_coherence,
    optimize,
    optimize_flow,
    plogp,
    predict_module_count,
    relabel_dense,
)

from conftest import clique_ring, disjoint_cliques, random_graph
from oracles import brute_force_optimum, physical_codelength, set_partitions, straight_line_codelength


@st.composite
def connected_graphs(draw, min_n=3, max_n=9):
    n = draw(st.integers(min_n, max_n))
    # a random spanning tree keeps the graph connected
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    edges = {(p, i) for i, p in zip(range(1, n), parents)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return UGraph(n, sorted(edges))


@st.composite
def graph_with_labels(draw):
    g = draw(connected_graphs())
    labels = draw(st.lists(st.integers(0, 3), min_size=g.n, max_size=g.n))
    return g, labels


def test_plogp_zero():
    assert plogp(0.0) == 0.0
    assert plogp(0.5) == pytest.approx(-0.5)


def test_relabel_dense_first_appearance():
    a, m = relabel_dense([7, 3, 7, 9, 3])
    assert a.tolist() == [0, 1, 0, 2, 1] and m == 3


def test_single_module_equals_degree_entropy():
    g = clique_ring(4, 5)
    one = Partition.from_labels(np.zeros(g.n, dtype=int))
    L = codelength(g, one)
    assert L.value == pytest.approx(entropy_bits(g.degrees / g.degrees.sum()), abs=1e-12)
    assert L.index == 0.0


def test_two_triangles_against_straight_line():
    # joined by one bridge so the graph is connected
    g = UGraph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
    labels = [0, 0, 0, 1, 1, 1]
    L = codelength(g, Partition.from_labels(labels))
    ref = straight_line_codelength(6, g.edges().tolist(), labels)
    assert L.value == pytest.approx(ref, abs=1e-12)
    assert L.value == pytest.approx(L.index + L.module)


def test_disjoint_triangles_warns():
    g = disjoint_cliques(2, 3)
    with pytest.warns(UserWarning, match="disconnected"):
        L = codelength(g, Partition.from_labels([0, 0, 0, 1, 1, 1]))
    assert L.value == pytest.approx(straight_line_codelength(6, g.edges().tolist(), [0, 0, 0, 1, 1, 1]))


@given(graph_with_labels())
def test_codelength_matches_oracle(gl):
    g, labels = gl
    L = codelength(g, Partition.from_labels(labels))
    assert L.value == pytest.approx(straight_line_codelength(g.n, g.edges().tolist(), labels), abs=1e-9)
    assert L.value >= 0 and L.index >= 0 and L.module >= 0


def test_expanded_form_identity(rng):
    for _ in range(100):
        g = random_graph(8, 0.4, rng)
        if g.m == 0:
            continue
        labels = rng.integers(0, 4, 8)
        p = Partition.from_labels(labels)
        fg = FlowGraph.from_ugraph(g)
        H = entropy_bits(g.degrees / g.degrees.sum())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            full = codelength(g, p).value
        assert expanded_codelength(g, p) == pytest.approx(full - H, abs=1e-12)
        # the expansion written with cut(i)/d and vol(i)/d directly
        a = p.assignment
        m = p.m
        d = g.total_degree
        cut = p.with_graph(g).cut / d
        vol = p.with_graph(g).vol / d
        expanded = (plogp(cut.sum()) - 2 * sum(plogp(x) for x in cut)
                    + sum(plogp(x + y) for x, y in zip(cut, vol)))
        assert expanded == pytest.approx(expanded_codelength(g, p), abs=1e-12)
        assert fg.n == 8 and len(a) == 8 and m >= 1


@given(graph_with_labels(), st.data())
def test_move_consistency(gl, data):
    g, labels = gl
    fg = FlowGraph.from_ugraph(g)
    state = MapEquationState(fg, labels)
    for _ in range(30):
        node = data.draw(st.integers(0, g.n - 1))
        target = data.draw(st.integers(0, g.n - 1))
        before = state.codelength
        predicted = state.delta(node, target)
        state.move(node, target)
        exact = flow_codelength(fg, state.assignment()[0]).value
        assert state.codelength == pytest.approx(exact, abs=1e-9)
        assert state.codelength - before == pytest.approx(predicted, abs=1e-9)


def test_move_fuzz(rng):
    g = clique_ring(5, 4)
    fg = FlowGraph.from_ugraph(g)
    state = MapEquationState(fg, rng.integers(0, 6, g.n))
    for i in range(10_000):
        state.move(int(rng.integers(g.n)), int(rng.integers(g.n)))
        if i % 500 == 0:
            assert state.codelength == pytest.approx(flow_codelength(fg, state.assignment()[0]).value, abs=1e-9)
    assert state.codelength == pytest.approx(flow_codelength(fg, state.assignment()[0]).value, abs=1e-9)


def test_partition_cache_updates(rng):
    g = random_graph(12, 0.3, rng)
    p = Partition.from_labels(rng.integers(0, 4, 12), g)
    for _ in range(200):
        p.move(g, int(rng.integers(12)), int(rng.integers(p.m)))
        assert p.check(g)


def test_two_disjoint_k5():
    g = disjoint_cliques(2, 5)
    p = optimize(g, seed=1)
    assert p.m == 2
    assert p.same_as(Partition.from_labels([0] * 5 + [1] * 5))


def test_ring_of_cliques():
    g = clique_ring(12, 5)
    p = optimize(g, seed=0)
    assert p.m == 12
    assert p.same_as(Partition.from_labels(np.repeat(np.arange(12), 5)))
    ring = Partition.from_labels(np.repeat(np.arange(12), 5))
    pairs = Partition.from_labels(np.repeat(np.arange(6), 10))
    assert codelength(g, ring).value < codelength(g, pairs).value


def test_brute_force_small(rng):
    hits = tried = 0
    while tried < 20:
        n = int(rng.integers(4, 8))
        g = random_graph(n, 0.5, rng)
        if g.m == 0:
            continue
        tried += 1
        best, _ = brute_force_optimum(n, g.edges().tolist())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            found = codelength(g, optimize(g, seed=int(rng.integers(1000)))).value
        assert found >= best - 1e-9
        hits += found <= best + 1e-9
    assert hits >= 18


def test_set_partition_enumeration_counts():
    # Bell numbers
    assert [sum(1 for _ in set_partitions(n)) for n in range(1, 7)] == [1, 2, 5, 15, 52, 203]


def test_optimizer_deterministic_and_monotone(rng):
    g = random_graph(60, 0.08, rng)
    a = optimize_flow(FlowGraph.from_ugraph(g), seed=4)
    b = optimize_flow(FlowGraph.from_ugraph(g), seed=4)
    assert np.array_equal(a.partition.assignment, b.partition.assignment)
    assert all(x >= y - 1e-12 for x, y in zip(a.trace, a.trace[1:]))
    assert a.codelength == pytest.approx(flow_codelength(FlowGraph.from_ugraph(g), a.partition.assignment).value)


def test_trials_never_worse(rng):
    g = random_graph(40, 0.1, rng)
    one = optimize_flow(FlowGraph.from_ugraph(g), 3, OptimizerOptions(trials=1)).codelength
    many = optimize_flow(FlowGraph.from_ugraph(g), 3, OptimizerOptions(trials=4)).codelength
    assert many <= one + 1e-12


def test_merging_disconnected_modules_never_helps(rng):
    for _ in range(30):
        k = int(rng.integers(2, 5))
        g = disjoint_cliques(k, int(rng.integers(2, 5)))
        size = g.n // k
        split = Partition.from_labels(np.repeat(np.arange(k), size))
        merged = split.assignment.copy()
        merged[merged == 1] = 0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert codelength(g, Partition.from_labels(merged)).value >= codelength(g, split).value - 1e-12


def test_predict_module_count():
    assert abs(predict_module_count(95019) - 5742) <= 0.01 * 5742
    assert abs(predict_module_count(514) - 57) <= 1
    assert abs(predict_module_count(13446) - 980) <= 0.01 * 980
    assert abs(predict_module_count(11969) - 884) <= 0.01 * 884
    assert predict_module_count(22) == 5
    assert predict_module_count(95019, base=math.e) == round(95019 / math.log(95019))
    with pytest.raises(ValueError):
        predict_module_count(1)


def test_balance_diagnostic():
    g = clique_ring(6, 4)
    rep = balance_diagnostic(g, Partition.from_labels(np.repeat(np.arange(6), 4), g))
    assert rep.dispersion == pytest.approx(0.0)
    assert rep.nu == pytest.approx(2 / 14)
    single = balance_diagnostic(g, Partition.from_labels(np.zeros(g.n, dtype=int)))
    assert single.nu == 0.0


@given(graph_with_labels())
def test_balance_nu_brute_force(gl):
    g, labels = gl
    p = Partition.from_labels(labels)
    rep = balance_diagnostic(g, p)
    ratios = []
    for mod in range(p.m):
        members = {i for i in range(g.n) if p.assignment[i] == mod}
        vol = sum(int(g.degrees[i]) for i in members)
        cut = sum(1 for u, v in g.edges().tolist() if (u in members) != (v in members))
        ratios.append(cut / vol)
    assert rep.nu == pytest.approx(max(ratios))
    assert 0.0 <= rep.nu <= 1.0


def test_balance_flags_zero_volume():
    g = UGraph(4, [(0, 1), (1, 2)])
    rep = balance_diagnostic(g, Partition.from_labels([0, 0, 0, 1]))
    assert rep.undefined == [1]


class TestCoherence:
    def test_singleton(self):
        assert module_coherence([1.3]) == pytest.approx(1.0)

    def test_opposite(self):
        assert module_coherence([0.4, 0.4 + math.pi]) == pytest.approx(0.0, abs=1e-12)

    def test_three_way(self):
        assert module_coherence([0, 2 * math.pi / 3, 4 * math.pi / 3]) == pytest.approx(0.0, abs=1e-12)

    def test_equal(self):
        assert module_coherence([2.0] * 7) == pytest.approx(1.0)

    def test_report_and_empty(self):
        p = Partition(np.array([0, 0, 2]))
        rep = coherence(p, [0.0, 0.0, 1.0])
        assert rep.empty == [1]
        assert rep.mean == pytest.approx(1.0)

    @given(st.lists(st.floats(0, 2 * math.pi), min_size=1, max_size=30), st.data())
    def test_bounds(self, theta, data):
        labels = data.draw(st.lists(st.integers(0, 3), min_size=len(theta), max_size=len(theta)))
        rep = coherence(Partition.from_labels(labels), theta)
        assert np.all((rep.per_module >= 0) & (rep.per_module <= 1))


def test_flowgraph_from_transitions_matches_undirected(rng):
    g = random_graph(15, 0.3, rng)
    while not g.is_connected():
        g = random_graph(15, 0.3, rng)
    A = g.adjacency()
    P = A.multiply(1.0 / g.degrees[:, None]).tocsr()
    pi = g.degrees / g.degrees.sum()
    a = FlowGraph.from_transitions(pi, P)
    b = FlowGraph.from_ugraph(g)
    labels = rng.integers(0, 3, 15)
    assert flow_codelength(a, labels).value == pytest.approx(flow_codelength(b, labels).value, abs=1e-12)
    assert list(itertools.islice(a.node_flow, 3)) == pytest.approx(list(b.node_flow[:3]))


def _random_chain(rng, n, n_phys):
    P = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
    P[np.arange(n), (np.arange(n) + 1) % n] += 0.1  # a cycle keeps it irreducible
    P /= P.sum(axis=1, keepdims=True)
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(abs(w - 1))])
    pi /= pi.sum()
    return pi, P, rng.integers(0, n_phys, n)


class TestPhysicalNodes:
    def test_codelength_matches_oracle(self, rng):
        for _ in range(20):
            pi, P, phys = _random_chain(rng, 8, 4)
            fg = FlowGraph.from_transitions(pi, sp.csr_matrix(P), phys, 4)
            labels = rng.integers(0, 3, 8)
            ref = physical_codelength(pi.tolist(), P.tolist(), phys.tolist(), labels.tolist())
            assert flow_codelength(fg, labels).value == pytest.approx(ref, abs=1e-12)

    def test_one_state_per_node_is_plain(self, rng):
        pi, P, _ = _random_chain(rng, 10, 10)
        plain = FlowGraph.from_transitions(pi, sp.csr_matrix(P))
        phys = FlowGraph.from_transitions(pi, sp.csr_matrix(P), np.arange(10))
        labels = rng.integers(0, 3, 10)
        assert flow_codelength(phys, labels).value == pytest.approx(flow_codelength(plain, labels).value, abs=1e-12)

    def test_move_consistency(self, rng):
        pi, P, phys = _random_chain(rng, 14, 5)
        fg = FlowGraph.from_transitions(pi, sp.csr_matrix(P), phys)
        state = MapEquationState(fg, rng.integers(0, 4, 14))
        for i in range(2000):
            node, target = int(rng.integers(14)), int(rng.integers(14))
            before = state.codelength
            predicted = state.delta(node, target)
            state.move(node, target)
            if i % 50 == 0:
                exact = flow_codelength(fg, state.assignment()[0]).value
                assert state.codelength == pytest.approx(exact, abs=1e-9)
            assert state.codelength - before == pytest.approx(predicted, abs=1e-9)

    def test_aggregate_keeps_physical_flows(self, rng):
        pi, P, phys = _random_chain(rng, 12, 4)
        fg = FlowGraph.from_transitions(pi, sp.csr_matrix(P), phys)
        coarse, m = relabel_dense(rng.integers(0, 5, 12))
        agg = fg.aggregate(coarse, m)
        top = rng.integers(0, 3, m)
        assert flow_codelength(agg, top).value == pytest.approx(flow_codelength(fg, top[coarse]).value, abs=1e-12)

    def test_merging_copies_of_a_node_pays_off(self):
        # two disconnected copies of a triangle pair: coding physical nodes
        # makes the lifted partition cheaper than keeping the copies apart
        g = UGraph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
        A = g.adjacency().toarray()
        P1 = A / A.sum(axis=1, keepdims=True)
        P = sp.block_diag([P1, P1]).tocsr()
        pi = np.concatenate([g.degrees, g.degrees]) / (2.0 * g.degrees.sum())
        fg = FlowGraph.from_transitions(pi, P, np.tile(np.arange(6), 2))
        lifted = np.array([0, 0, 0, 1, 1, 1] * 2)
        split = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3])
        assert flow_codelength(fg, lifted).value < flow_codelength(fg, split).value
        assert flow_codelength(fg, lifted).value == pytest.approx(
            codelength(g, Partition.from_labels(lifted[:6])).value, abs=1e-12)
