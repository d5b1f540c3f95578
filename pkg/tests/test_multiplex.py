import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypermux.embed import EmbeddingState, TrainConfig, geometric_weights
from hypermux.errors import NoComparablePairs, PowerIterationError
from hypermux.geometry import TWO_PI, DiskParams
from hypermux.graph import UGraph
from hypermux.mapeq import codelength, optimize
from hypermux.multiplex import (
    MultiplexNet,
    align_angles,
    build_supra_graph,
    correlated_multiplex,
    direct_stationary,
    fit_independent,
    fit_multiplex,
    layer_params,
    multiplex_communities,
    stationary_distribution,
    violation_ratio,
)

from conftest import clique_ring, disjoint_cliques, random_graph


@st.composite
def multiplexes(draw, max_n=8, max_layers=3):
    n = draw(st.integers(3, max_n))
    L = draw(st.integers(1, max_layers))
    pairs = list(itertools.combinations(range(n), 2))
    layers = []
    for _ in range(L):
        mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
        layers.append(UGraph(n, [p for p, keep in zip(pairs, mask) if keep]))
    if all(g.m == 0 for g in layers):
        layers[0] = UGraph(n, [(0, 1)])
    return MultiplexNet(layers)


def brute_violation(net, thetas, use_degree):
    sets = [g.neighbor_sets() for g in net.layers]
    L = net.L
    common = [u for u in range(net.n) if net.presence[:, u].sum() >= 2]

    def layers_of(u):
        return [l for l in range(L) if net.presence[l, u]]

    def cn(u):
        return len(set.intersection(*(sets[l][u] for l in layers_of(u))))

    def spread(u):
        ls = layers_of(u)
        best = 0.0
        for a, b in itertools.combinations(ls, 2):
            d = abs(thetas[a][u] - thetas[b][u]) % TWO_PI
            best = max(best, min(d, TWO_PI - d))
        return best

    viol = total = 0
    for u in common:
        for v in common:
            if u == v or not cn(u) > cn(v):
                continue
            if use_degree:
                dmax = max(net.layers[l].degrees[u] for l in layers_of(u))
                dmin = min(net.layers[l].degrees[v] for l in layers_of(v))
                if not dmax < dmin:
                    continue
            total += 1
            viol += not spread(u) < spread(v)
    return viol, total


class TestViolationRatio:
    def test_hand_instance(self):
        # node 0 shares neighbours {1, 2} in both layers, node 3 shares none
        l1 = UGraph(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
        l2 = UGraph(4, [(0, 1), (0, 2), (0, 3), (1, 2)])
        net = MultiplexNet([l1, l2])
        thetas = np.array([[0.0, 1.0, 2.0, 3.0], [0.5, 1.0, 2.2, 3.0]])
        res = violation_ratio(net, thetas, use_degree=False)
        viol, total = brute_violation(net, thetas, False)
        assert (res.violations, res.pairs) == (viol, total)
        assert res.ratio == pytest.approx(viol / total)
        assert total > 0

    def test_single_common_node(self):
        net = MultiplexNet([UGraph(4, [(0, 1)]), UGraph(4, [(0, 2)])])
        with pytest.raises(NoComparablePairs):
            violation_ratio(net, np.zeros((2, 4)))

    def test_needs_two_layers(self):
        with pytest.raises(ValueError):
            violation_ratio(MultiplexNet([UGraph(3, [(0, 1)])]), np.zeros((1, 3)))

    @given(multiplexes(max_layers=3), st.booleans(), st.data())
    def test_matches_brute_force(self, net, use_degree, data):
        if net.L < 2:
            return
        flat = data.draw(st.lists(st.floats(0, TWO_PI, exclude_max=True), min_size=net.L * net.n,
                                  max_size=net.L * net.n))
        thetas = np.array(flat).reshape(net.L, net.n)
        viol, total = brute_violation(net, thetas, use_degree)
        try:
            res = violation_ratio(net, thetas, use_degree, chunk=3)
        except NoComparablePairs:
            assert total == 0
            return
        assert (res.violations, res.pairs) == (viol, total)

    def test_pairwise_mode_differs(self):
        l = UGraph(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
        net = MultiplexNet([l, l, l])
        a = violation_ratio(net, np.zeros((3, 4)), False, "intersection")
        b = violation_ratio(net, np.zeros((3, 4)), False, "pairwise")
        assert a.pairs == b.pairs
        with pytest.raises(ValueError):
            violation_ratio(net, np.zeros((3, 4)), False, "bogus")


@pytest.mark.filterwarnings("ignore:.*no edges in any layer")
class TestSupraGraph:
    @given(multiplexes(), st.floats(0, 1))
    def test_rows_stochastic(self, net, omega):
        sg = build_supra_graph(net, None, omega)
        rows = np.asarray(sg.P.sum(axis=1)).ravel()
        np.testing.assert_allclose(rows, 1.0, atol=1e-12)

    def test_rows_stochastic_with_geometry(self):
        net, r, th = correlated_multiplex(DiskParams(200, 0.6, 2.0, 0.1), 2, seed=1)
        params = layer_params(net, 0.6, 0.1, 2.0)
        embs = [EmbeddingState(r, th, p) for p in params]
        sg = build_supra_graph(net, embs, 0.3)
        np.testing.assert_allclose(np.asarray(sg.P.sum(axis=1)).ravel(), 1.0, atol=1e-12)

    def test_omega_zero_block_diagonal(self, rng):
        net = MultiplexNet([random_graph(10, 0.4, rng), random_graph(10, 0.4, rng)])
        sg = build_supra_graph(net, None, 0.0)
        coo = sg.P.tocoo()
        assert np.all(sg.layer[coo.row] == sg.layer[coo.col])

    def test_single_layer_equals_geometric_walk(self, rng):
        g = clique_ring(4, 4)
        p = DiskParams(g.n, 0.75, 0.0, 0.3)
        emb = EmbeddingState(rng.uniform(1, p.R, g.n), rng.uniform(0, TWO_PI, g.n), p)
        w = geometric_weights(g, emb.r, emb.theta, p)
        e = g.edges()
        A = np.zeros((g.n, g.n))
        A[e[:, 0], e[:, 1]] = w
        A[e[:, 1], e[:, 0]] = w
        ref = A / A.sum(axis=1, keepdims=True)
        for omega in (0.0, 0.4, 1.0):
            sg = build_supra_graph(MultiplexNet([g]), [emb], omega)
            np.testing.assert_allclose(sg.P.toarray(), ref, atol=1e-15)

    def test_relax_transitions(self):
        # node 0 lives in both layers; from (0, layer 0) the walker reaches
        # layer-1 neighbours with weight omega / 2
        l0 = UGraph(3, [(0, 1)])
        l1 = UGraph(3, [(0, 2)])
        sg = build_supra_graph(MultiplexNet([l0, l1]), None, 0.4)
        src = sg.state_of[0, 0]
        same_layer, other_layer = sg.state_of[0, 1], sg.state_of[1, 2]
        P = sg.P.toarray()
        assert P[src, same_layer] == pytest.approx(1 - 0.4 + 0.2)
        assert P[src, other_layer] == pytest.approx(0.2)

    def test_isolated_flagged(self):
        net = MultiplexNet([UGraph(3, [(0, 1)]), UGraph(3, [(0, 1)])])
        with pytest.warns(UserWarning, match="no edges"):
            sg = build_supra_graph(net)
        assert sg.isolated == [2]

    def test_bad_omega(self):
        with pytest.raises(ValueError):
            build_supra_graph(MultiplexNet([UGraph(2, [(0, 1)])]), None, 1.5)


class TestStationary:
    def test_direct_matches_power(self, rng):
        net = MultiplexNet([clique_ring(3, 4), clique_ring(3, 4)])
        sg = build_supra_graph(net, None, 0.2)
        pi = stationary_distribution(sg.P)
        np.testing.assert_allclose(pi, direct_stationary(sg.P, sg.strength), atol=1e-8)
        np.testing.assert_allclose(pi @ sg.P.toarray(), pi, atol=1e-9)

    def test_divergence_reported(self):
        sg = build_supra_graph(MultiplexNet([clique_ring(6, 3)]), None, 0.0)
        with pytest.raises(PowerIterationError) as e:
            stationary_distribution(sg.P, max_iter=2)
        assert e.value.iterations == 2 and e.value.residual > 0


class TestMultiplexCommunities:
    def test_two_disjoint_cliques(self):
        g = disjoint_cliques(2, 5)
        res = multiplex_communities(MultiplexNet([g, g]), seed=0)
        assert res.partition.m == 2

    def test_identical_layers_match_single_layer(self):
        g = clique_ring(6, 5)
        single = optimize(g, seed=0)
        for omega in (0.0, 0.15, 0.9):
            res = multiplex_communities(MultiplexNet([g, g, g]), None, omega, seed=0)
            assert res.partition.same_as(single)

    def test_identical_rhg_layers_with_isolates(self):
        net, _, _ = correlated_multiplex(DiskParams(300, 0.6, 2.0, 0.1), 1, seed=9)
        g = net.layers[0]
        assert (g.degrees == 0).any()
        single = optimize(g, seed=0)
        for omega in (0.0, 0.15, 0.5):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = multiplex_communities(MultiplexNet([g, g]), None, omega, seed=0)
            assert res.partition.same_as(single)
            assert res.codelength == pytest.approx(codelength(g, single).value, abs=1e-9)

    def test_omega_continuity(self, rng):
        a = clique_ring(5, 4)
        b = UGraph(20, np.concatenate([a.edges(), [[0, 10], [3, 17]]]))
        net = MultiplexNet([a, b])
        p0 = multiplex_communities(net, None, 0.0, seed=3).partition
        p1 = multiplex_communities(net, None, 1e-6, seed=3).partition
        assert p0.same_as(p1)

    def test_projection_single_layer_node(self):
        # node 6 appears only in layer 1
        l0 = UGraph(7, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
        l1 = UGraph(7, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (5, 6)])
        res = multiplex_communities(MultiplexNet([l0, l1]), None, 0.15, seed=1)
        sg, sa, node_mod = res.supra, res.state_assignment, res.partition.assignment
        mod6 = sa[sg.state_of[1, 6]]
        for u in range(6):
            mods = {int(sa[sg.state_of[l, u]]) for l in range(2) if sg.state_of[l, u] >= 0}
            if mods == {mod6}:
                assert node_mod[u] == node_mod[6]
            elif mod6 not in mods:
                assert node_mod[u] != node_mod[6]

    def test_planted_partition(self):
        agreements = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = 40
            truth = np.repeat([0, 1], n // 2)
            layers = []
            for _ in range(2):
                iu, ju = np.triu_indices(n, 1)
                p = np.where(truth[iu] == truth[ju], 0.5, 0.02)
                keep = rng.random(len(iu)) < p
                layers.append(UGraph(n, np.column_stack([iu[keep], ju[keep]])))
            labels = multiplex_communities(MultiplexNet(layers), None, 0.15, seed=seed).partition.assignment
            agree = sum(np.bincount(truth[labels == m], minlength=2).max() for m in np.unique(labels)) / n
            agreements.append(agree if len(np.unique(labels)) <= 2 else 0.0)
        assert min(agreements) >= 0.9


class TestAlignment:
    def test_pulls_toward_circular_mean(self):
        th = [[0.1, 1.0], [TWO_PI - 0.1, 2.0]]
        presence = np.array([[True, True], [True, False]])
        align_angles(th, presence, 1.0)
        assert th[0][0] == pytest.approx(0.0, abs=1e-12) or th[0][0] == pytest.approx(TWO_PI)
        assert th[1][0] == pytest.approx(th[0][0])
        # node 1 lives in one layer only
        assert th[0][1] == 1.0 and th[1][1] == 2.0

    def test_half_step_halves_gap(self):
        th = [[0.0], [1.0]]
        align_angles(th, np.ones((2, 1), dtype=bool), 0.5)
        assert th[0][0] == pytest.approx(0.25) and th[1][0] == pytest.approx(0.75)

    def test_undefined_mean_skipped(self):
        th = [[0.0], [math.pi]]
        assert align_angles(th, np.ones((2, 1), dtype=bool), 0.5) == 1
        assert th == [[0.0], [math.pi]]


FAST = TrainConfig(outer_iters=3, epochs=2, refine_sweeps=1, refine_grid=64)


def test_single_layer_fit_matches_embed():
    from hypermux.embed import fit

    g = clique_ring(5, 5)
    params = DiskParams(g.n, 0.75, 0.0, 0.3)
    a = fit_multiplex(MultiplexNet([g]), [params], FAST, lambda_cross=0.7)
    b = fit(g, params, FAST)
    assert np.array_equal(a.layers[0].theta, b.state.theta)
    assert np.array_equal(a.layers[0].r, b.state.r)


def test_fit_multiplex_shapes_and_radii_per_layer():
    net, _, _ = correlated_multiplex(DiskParams(120, 0.6, 2.0, 0.1), 2, seed=4)
    params = layer_params(net, 0.6, 0.1, 2.0)
    with pytest.warns(UserWarning):
        res = fit_multiplex(net, params, FAST)
    assert len(res.layers) == 2 and len(res.trace) == FAST.outer_iters
    assert res.partition.n == net.n
    rows = res.rows(net.labels, net.layer_names)
    assert len(rows) == int(net.presence.sum())
    for s, p in zip(res.layers, params):
        assert np.all((s.r > 0) & (s.r <= p.R))
    again = fit_multiplex(net, params, FAST)
    assert np.array_equal(res.thetas(), again.thetas())


def test_alignment_does_not_touch_radii():
    net, _, _ = correlated_multiplex(DiskParams(80, 0.6, 2.0, 0.1), 2, seed=2)
    params = layer_params(net, 0.6, 0.1, 2.0)
    with pytest.warns(UserWarning):
        a = fit_multiplex(net, params, FAST, lambda_cross=0.0)
        b = fit_multiplex(net, params, FAST, lambda_cross=0.9)
    assert not np.array_equal(a.thetas(), b.thetas())
    for la, lb in zip(a.layers, b.layers):
        assert la.r.shape == lb.r.shape


def _median_gap(emb, net):
    both = net.presence[0] & net.presence[1]
    d = np.abs(emb.layers[0].theta - emb.layers[1].theta) % TWO_PI
    return float(np.median(np.minimum(d, TWO_PI - d)[both]))


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore:graph has")
@pytest.mark.filterwarnings("ignore:.*no edges")
def test_identical_layers_alignment_beats_independent():
    cfg = TrainConfig(outer_iters=4, epochs=3)
    wins = 0
    for seed in range(10):
        g, _, _ = (lambda s: (s[0].layers[0], s[1], s[2]))(correlated_multiplex(DiskParams(100, 0.6, 2.0, 0.1), 1, seed))
        net = MultiplexNet([g, g])
        params = layer_params(net, 0.6, 0.1, 2.0)
        c = TrainConfig(**{**cfg.to_dict(), "seed": seed})
        wins += _median_gap(fit_multiplex(net, params, c), net) < _median_gap(fit_independent(net, params, c), net)
    assert wins == 10
