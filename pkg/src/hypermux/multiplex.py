"""Multiplex networks: containers, angular-correlation statistic, supra-graph
communities and multi-layer embedding.

A multiplex is a list of layers over one node universe. A node is *present*
in a layer when it has at least one edge there. The random walker lives on
states ``(node, layer)``: with probability ``1 - omega`` it follows an edge of
its current layer, and with probability ``omega`` it first relaxes to a
uniformly chosen layer holding the node and follows an edge there. Edge
weights are the Fermi-Dirac link probabilities of the layer's embedding, or
1 when no embedding is given.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from . import embed as _embed
from .errors import NoComparablePairs, PowerIterationError
from .geometry import TWO_PI, DiskParams, connection_probability, distance_array
from .graph import UGraph
from .mapeq import FlowGraph, OptimizerOptions, Partition, coherence, flow_codelength, optimize_flow, relabel_dense
from .rhg import make_rng, sample_edges, sample_radius

log = logging.getLogger(__name__)


class MultiplexNet:
    def __init__(self, layers, labels=None, layer_names=None):
        layers = list(layers)
        if not layers:
            raise ValueError("need at least one layer")
        n = layers[0].n
        if any(g.n != n for g in layers):
            raise ValueError("all layers must share the node universe")
        self.layers: list[UGraph] = layers
        self.n = n
        self.labels = list(labels) if labels is not None else [str(i) for i in range(n)]
        self.layer_names = list(layer_names) if layer_names is not None else [str(i + 1) for i in range(len(layers))]
        self.presence = np.array([g.degrees > 0 for g in layers])

    @property
    def L(self) -> int:
        return len(self.layers)

    def aggregate(self) -> UGraph:
        """Union of all layers' edges."""
        return UGraph(self.n, np.concatenate([g.edges() for g in self.layers]))

    def common_nodes(self) -> np.ndarray:
        """Nodes present in at least two layers."""
        return np.flatnonzero(self.presence.sum(axis=0) >= 2)

    def __repr__(self):
        return f"MultiplexNet(n={self.n}, layers={self.L}, m={[g.m for g in self.layers]})"


def correlated_multiplex(params: DiskParams, layers: int, seed: int) -> tuple[MultiplexNet, np.ndarray, np.ndarray]:
    """Layers sharing one set of hyperbolic coordinates, edges drawn independently per layer.

    Returns ``(net, r, theta)``.
    """
    rng = make_rng(seed)
    r = sample_radius(params, rng, params.n)
    theta = rng.random(params.n) * TWO_PI
    graphs = [UGraph(params.n, sample_edges(r, theta, params, rng)) for _ in range(layers)]
    return MultiplexNet(graphs), r, theta


# -- violation ratio -------------------------------------------------------


def _cross_layer_cn(net: MultiplexNet, mode: str) -> np.ndarray:
    n = net.n
    cn = np.zeros(n, dtype=np.int64)
    sets = [g.neighbor_sets() for g in net.layers]
    pres = net.presence
    for u in range(n):
        ls = np.flatnonzero(pres[:, u]).tolist()
        if len(ls) < 2:
            continue
        if mode == "intersection":
            cn[u] = len(set.intersection(*(sets[l][u] for l in ls)))
        elif mode == "pairwise":
            cn[u] = sum(len(sets[a][u] & sets[b][u]) for i, a in enumerate(ls) for b in ls[i + 1:])
        else:
            raise ValueError(f"unknown cn_mode {mode!r}")
    return cn


def _angular_spread(net: MultiplexNet, thetas: np.ndarray) -> np.ndarray:
    """Largest circular difference between a node's angles across the layers holding it."""
    L = net.L
    out = np.zeros(net.n)
    for a in range(L):
        for b in range(a + 1, L):
            both = net.presence[a] & net.presence[b]
            d = np.abs(thetas[a] - thetas[b]) % TWO_PI
            d = np.minimum(d, TWO_PI - d)
            out = np.where(both, np.maximum(out, d), out)
    return out


@dataclass
class ViolationResult:
    ratio: float
    violations: int
    pairs: int


def violation_ratio(net: MultiplexNet, thetas, use_degree: bool = True, cn_mode: str = "intersection",
                    chunk: int = 2048) -> ViolationResult:
    """Fraction of ordered node pairs that contradict "more shared neighbours, closer angles".

    Over node pairs ``(u, v)`` both present in at least two layers, a pair
    qualifies when ``CN(u) > CN(v)`` and, with ``use_degree``, also
    ``max deg(u) < min deg(v)`` (extremes over layers holding the node). It
    violates when ``dtheta(u) >= dtheta(v)``.
    """
    if net.L < 2:
        raise ValueError("need at least two layers")
    thetas = np.asarray(thetas, dtype=float)
    if thetas.shape != (net.L, net.n):
        raise ValueError(f"thetas must have shape {(net.L, net.n)}")
    common = net.common_nodes()
    if len(common) < 2:
        raise NoComparablePairs("fewer than two nodes are shared by two layers")
    cn = _cross_layer_cn(net, cn_mode)[common].astype(float)
    spread = _angular_spread(net, thetas)[common]
    deg = np.array([g.degrees for g in net.layers], dtype=float)[:, common]
    pres = net.presence[:, common]
    dmax = np.where(pres, deg, -np.inf).max(axis=0)
    dmin = np.where(pres, deg, np.inf).min(axis=0)
    viol = total = 0
    for s in range(0, len(common), chunk):
        sl = slice(s, s + chunk)
        ok = cn[sl, None] > cn[None, :]
        if use_degree:
            ok &= dmax[sl, None] < dmin[None, :]
        total += int(np.count_nonzero(ok))
        viol += int(np.count_nonzero(ok & ~(spread[sl, None] < spread[None, :])))
    if total == 0:
        raise NoComparablePairs("no node pair satisfies the ordering conditions")
    return ViolationResult(viol / total, viol, total)


# -- supra graph -----------------------------------------------------------


@dataclass
class SupraGraph:
    P: sp.csr_matrix
    node: np.ndarray
    layer: np.ndarray
    state_of: np.ndarray  # (L, n), -1 where absent
    strength: np.ndarray  # weighted degree of each state within its layer
    isolated: list[int] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.node)


def _layer_weights(g: UGraph, emb) -> np.ndarray:
    e = g.edges()
    if emb is None:
        return np.ones(len(e))
    r, th = np.asarray(emb.r), np.asarray(emb.theta)
    d = distance_array(r[e[:, 0]], th[e[:, 0]], r[e[:, 1]], th[e[:, 1]])
    return np.maximum(connection_probability(d, emb.params), 1e-12)


def build_supra_graph(net: MultiplexNet, embeddings=None, omega: float = 0.15) -> SupraGraph:
    """Row-stochastic transition matrix over ``(node, layer)`` states."""
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    L, n = net.L, net.n
    if embeddings is not None and len(embeddings) != L:
        raise ValueError("one embedding per layer required")
    pres = net.presence
    state_of = -np.ones((L, n), dtype=np.int64)
    ll, uu = np.nonzero(pres)
    state_of[ll, uu] = np.arange(len(ll))
    nl = pres.sum(axis=0)
    isolated = np.flatnonzero(nl == 0).tolist()
    if isolated:
        warnings.warn(f"{len(isolated)} nodes have no edges in any layer; they get no states", stacklevel=2)

    # row-normalised walk of each layer
    walks = []
    strength = np.zeros(len(ll))
    for li, g in enumerate(net.layers):
        e = g.edges()
        w = _layer_weights(g, None if embeddings is None else embeddings[li])
        A = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]),
                                                   np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n)).tocsr()
        s = np.asarray(A.sum(axis=1)).ravel()
        inv = np.divide(1.0, s, out=np.zeros(n), where=s > 0)
        strength[state_of[li, pres[li]]] = s[pres[li]]
        walks.append(sp.diags(inv) @ A)

    rows, cols, vals = [], [], []
    for src in range(L):
        for dst in range(L):
            W = walks[dst].tocoo()
            u, v, x = W.row, W.col, W.data
            keep = pres[src, u]
            u, v, x = u[keep], v[keep], x[keep]
            coef = omega / nl[u]
            if src == dst:
                coef = coef + (1.0 - omega)
            good = coef > 0
            rows.append(state_of[src, u[good]])
            cols.append(state_of[dst, v[good]])
            vals.append(coef[good] * x[good])
    N = len(ll)
    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)).tocsr()
    P.sum_duplicates()
    return SupraGraph(P, uu.astype(np.int64), ll.astype(np.int64), state_of, strength, isolated)


def direct_stationary(P: sp.csr_matrix, weight) -> np.ndarray:
    """Stationary vector from a sparse solve on each connected class.

    Each class receives the share of ``weight`` it holds. The support of a
    supra-graph walk is symmetric, so weak components are closed classes.
    """
    n = P.shape[0]
    weight = np.asarray(weight, dtype=float)
    ncomp, comp = connected_components(P, directed=True, connection="weak")
    pi = np.zeros(n)
    total = weight.sum()
    for c in range(ncomp):
        idx = np.flatnonzero(comp == c)
        share = weight[idx].sum() / total
        if len(idx) == 1:
            pi[idx] = share
            continue
        A = (sp.identity(len(idx), format="csr") - P[idx][:, idx]).T.tolil()
        A[0, :] = 1.0
        b = np.zeros(len(idx))
        b[0] = 1.0
        x = spla.spsolve(A.tocsc(), b)
        x = np.maximum(x, 0.0)
        pi[idx] = share * x / x.sum()
    return pi


def stationary_distribution(P: sp.csr_matrix, start=None, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Lazy power iteration ``pi <- (pi + pi P) / 2`` until the L1 change is below ``tol``."""
    n = P.shape[0]
    pi = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float) / np.sum(start)
    PT = P.T.tocsr()
    res = math.inf
    for it in range(1, max_iter + 1):
        nxt = 0.5 * (pi + PT @ pi)
        nxt /= nxt.sum()
        res = float(np.abs(nxt - pi).sum())
        pi = nxt
        if res < tol:
            return pi
    raise PowerIterationError(res, max_iter)


def _vote(sg: SupraGraph, state_mod: np.ndarray, n: int) -> np.ndarray:
    m = int(state_mod.max()) + 1
    counts = sp.coo_matrix((np.ones(sg.size), (sg.node, state_mod)), shape=(n, m)).toarray()
    # argmax returns the first (lowest id) maximum, which is the tie rule
    out = counts.argmax(axis=1)
    nxt = m
    for u in sg.isolated:
        out[u] = nxt
        nxt += 1
    return out


@dataclass
class MultiplexPartition:
    partition: Partition
    state_assignment: np.ndarray
    codelength: float
    supra: SupraGraph


def multiplex_communities(net: MultiplexNet, embeddings=None, omega: float = 0.15, seed: int = 0,
                          options: OptimizerOptions | None = None) -> MultiplexPartition:
    """Map-equation modules of the supra-graph walk, projected to nodes by majority vote."""
    sg = build_supra_graph(net, embeddings, omega)
    if sg.size == 0:
        raise ValueError("multiplex has no edges")
    # geometry weights can nearly decouple regions, which makes plain power
    # iteration crawl; start it from a direct solve and let it verify
    pi = stationary_distribution(sg.P, direct_stationary(sg.P, sg.strength))
    fg = FlowGraph.from_transitions(pi, sg.P, sg.node, net.n)
    res = optimize_flow(fg, seed, options)
    states, value = res.partition.assignment, res.codelength
    # second start: states of one physical node begin together. Local moving on
    # the doubled state graph gets stuck easily, and for identical layers this
    # start is exactly the single-layer problem.
    phys = optimize_flow(fg.aggregate(sg.node, net.n), seed, options).partition.assignment
    lifted = relabel_dense(phys[sg.node])[0]
    lifted_value = flow_codelength(fg, lifted).value
    if lifted_value <= value + 1e-12:
        states, value = lifted, lifted_value
    labels = _vote(sg, states, net.n)
    return MultiplexPartition(Partition.from_labels(labels), states, value, sg)


# -- multi-layer embedding -------------------------------------------------


@dataclass
class MultiplexEmbedding:
    layers: list  # EmbeddingState per layer
    partition: Partition
    presence: np.ndarray
    trace: list = field(default_factory=list)

    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.layers])

    def rows(self, labels, layer_names):
        """``(node_label, layer_name, r, theta)`` for every present state."""
        out = []
        for li, s in enumerate(self.layers):
            for u in np.flatnonzero(self.presence[li]).tolist():
                out.append((labels[u], layer_names[li], float(s.r[u]), float(s.theta[u])))
        return out


@dataclass
class MultiplexTraceRow:
    iter: int
    o1: list
    mean_coherence: float
    codelength: float


def layer_params(net: MultiplexNet, alpha: float, T: float, C: float = 0.0) -> list[DiskParams]:
    """Disk parameters per layer; every layer lives on a disk sized for the full node universe."""
    return [DiskParams(net.n, alpha, C, T) for _ in range(net.L)]


def align_angles(thetas: list, presence: np.ndarray, weight: float) -> int:
    """Pull each node's per-layer angles toward their circular mean.

    ``thetas`` is a list of per-layer mutable sequences, updated in place.
    Returns the number of nodes skipped because their mean is undefined.
    """
    L = len(thetas)
    n = presence.shape[1]
    skipped = 0
    for u in range(n):
        ls = [l for l in range(L) if presence[l, u]]
        if len(ls) < 2:
            continue
        c = sum(math.cos(thetas[l][u]) for l in ls)
        s = sum(math.sin(thetas[l][u]) for l in ls)
        if math.hypot(c, s) < 1e-12:
            skipped += 1
            continue
        mean = math.atan2(s, c)
        for l in ls:
            diff = math.remainder(mean - thetas[l][u], TWO_PI)
            thetas[l][u] = (thetas[l][u] + weight * diff) % TWO_PI
    return skipped


def fit_multiplex(net: MultiplexNet, params: list[DiskParams], cfg=None, omega: float = 0.15,
                  lambda_cross: float = 0.5, options: OptimizerOptions | None = None) -> MultiplexEmbedding:
    """Embed every layer on its own disk with shared multiplex communities.

    Each outer iteration runs the per-layer edge epochs and coherence pass,
    then the cross-layer alignment, then refreshes the multiplex partition on
    the geometry-weighted supra-graph. Radii are never touched by alignment.
    """
    cfg = cfg or _embed.TrainConfig()
    if len(params) != net.L:
        raise ValueError("one DiskParams per layer required")
    if net.L == 1:
        res = _embed.fit(net.layers[0], params[0], cfg, options)
        return MultiplexEmbedding([res.state], res.partition, net.presence.copy(),
                                  [MultiplexTraceRow(t.iter, [t.o1], t.mean_coherence, t.codelength) for t in res.trace])
    if not 0.0 <= lambda_cross <= 1.0:
        raise ValueError("lambda_cross must lie in [0, 1]")
    rng = make_rng(cfg.seed)
    mp = multiplex_communities(net, None, omega, int(rng.integers(2**63)), options)
    part = mp.partition
    agg = net.aggregate()
    theta0 = _embed.angular_init(part, agg, rng, cfg.arc_padding)
    children = np.random.SeedSequence(cfg.seed).spawn(net.L)
    trainers = []
    for li, g in enumerate(net.layers):
        p = params[li]
        r = np.array([_embed.radial_init(int(k), p) if k > 0 else p.R for k in g.degrees])
        th = _embed.angular_refine(g, r, theta0, p, cfg.refine_sweeps, cfg.refine_grid)
        t = _embed.LayerTrainer(g, p, cfg, np.random.Generator(np.random.PCG64(children[li])),
                                r, th, cfg.outer_iters * cfg.epochs)
        trainers.append(t)
    present_nodes = [np.flatnonzero(net.presence[l]).tolist() for l in range(net.L)]
    trace = []
    for it in range(cfg.outer_iters):
        for li, t in enumerate(trainers):
            for _ in range(cfg.epochs):
                t.edge_epoch()
            t.coherence_pass(part.assignment, present_nodes[li])
        if lambda_cross > 0:
            align_angles([t.theta for t in trainers], net.presence, lambda_cross)
        states = []
        for li, t in enumerate(trainers):
            r, th = t.arrays()
            states.append(_embed.EmbeddingState(r, th, params[li]))
        mp = multiplex_communities(net, states, omega, int(rng.integers(2**63)), options)
        part = mp.partition
        o1 = [_embed.link_nll(g, s.r, s.theta, s.params) for g, s in zip(net.layers, states)]
        xi = coherence(part, np.array(states[0].theta)).mean
        trace.append(MultiplexTraceRow(it, o1, xi, mp.codelength))
        log.debug("iter %d: O1=%s L=%.4f", it, o1, mp.codelength)
    for s in states:
        s.partition = part
        s.iter = cfg.outer_iters
        s.project()
    return MultiplexEmbedding(states, part, net.presence.copy(), trace)


def fit_independent(net: MultiplexNet, params: list[DiskParams], cfg=None,
                    options: OptimizerOptions | None = None) -> MultiplexEmbedding:
    """Baseline: each layer embedded on its own with :func:`embed.fit`."""
    cfg = cfg or _embed.TrainConfig()
    children = np.random.SeedSequence(cfg.seed).spawn(net.L)
    states = []
    for li, g in enumerate(net.layers):
        sub = replace(cfg, seed=int(children[li].generate_state(1, dtype=np.uint64)[0]))
        states.append(_embed.fit(g, params[li], sub, options).state)
    part = Partition.from_labels(np.zeros(net.n, dtype=np.int64))
    return MultiplexEmbedding(states, part, net.presence.copy())
