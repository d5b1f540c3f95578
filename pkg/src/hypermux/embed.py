"""Single-layer hyperbolic embedding driven by map-equation communities.

The fit alternates three phases per outer iteration:

* Riemannian SGD on the first-order link likelihood (Fermi-Dirac link
  probability, negative sampling with ``P(v) ~ deg(v)^(3/4)``);
* an angular coherence pass pulling each node toward its module direction;
* a community refresh: map-equation optimisation on the observed edges
  weighted by their current link probability.

Radii start from the degree-based analytical estimate, angles from a
conductance-ordered arc layout of the initial communities.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import (
    TWO_PI,
    DiskParams,
    PolarPoint,
    connection_probability,
    distance,
    distance_array,
    distance_partials_raw,
    pairwise_distances,
)
from .graph import UGraph
from .mapeq import FlowGraph, OptimizerOptions, Partition, coherence, optimize, optimize_flow
from .rhg import fit_power_law_exponent, make_rng

log = logging.getLogger(__name__)

R_MIN = 1e-6


@dataclass
class TrainConfig:
    outer_iters: int = 10
    epochs: int = 5
    lr: float = 0.05
    lr_final: float = 0.005
    negatives: int = 5
    coherence_weight: float = 0.1
    arc_padding: float = 0.02
    refine_sweeps: int = 3
    refine_grid: int = 256
    importance_weights: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.refine_sweeps < 0 or self.refine_grid < 1:
            raise ValueError("refine_sweeps must be >= 0 and refine_grid >= 1")
        for name in ("outer_iters", "epochs", "negatives"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not (self.lr > 0 and self.lr_final > 0 and self.coherence_weight >= 0):
            raise ValueError("learning rates must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EmbeddingState:
    r: np.ndarray
    theta: np.ndarray
    params: DiskParams
    partition: Partition | None = None
    iter: int = 0

    @property
    def coords(self) -> list[PolarPoint]:
        return [PolarPoint(float(a), float(b)) for a, b in zip(self.r, self.theta)]

    def project(self) -> None:
        np.clip(self.r, R_MIN, self.params.R, out=self.r)
        self.theta[:] = np.mod(self.theta, TWO_PI)


def estimate_params(g: UGraph, T: float = 0.5, C: float = 0.0) -> DiskParams:
    """Disk parameters for a graph of unknown origin.

    ``alpha`` comes from a power-law fit of the degrees, clamped to
    ``[0.55, 0.95]``.
    """
    try:
        beta, _ = fit_power_law_exponent(g.degrees)
        alpha = (beta - 1.0) / 2.0
    except ValueError:
        alpha = 0.75
    alpha = float(np.clip(alpha, 0.55, 0.95))
    return DiskParams(g.n, alpha, C, T)


def radial_init(deg: int, params: DiskParams) -> float:
    """Degree-based radius estimate, clamped to the disk; isolated nodes sit on the rim."""
    if deg <= 0:
        return params.R
    a, T, N = params.alpha, params.T, params.n
    arg = 2.0 * N * a * T / (deg * math.sin(math.pi * T) * (a - 0.5))
    return min(params.R, max(R_MIN, 2.0 * math.log(arg)))


def radial_init_all(degrees, params: DiskParams) -> np.ndarray:
    return np.array([radial_init(int(k), params) for k in degrees], dtype=float)


def module_edge_counts(g: UGraph, p: Partition) -> np.ndarray:
    """Dense ``m x m`` matrix of edge counts between modules."""
    a = p.assignment
    m = p.m
    e = g.edges()
    out = np.zeros((m, m), dtype=np.int64)
    np.add.at(out, (a[e[:, 0]], a[e[:, 1]]), 1)
    return out + out.T - np.diag(np.diag(out))


def module_chain(g: UGraph, p: Partition) -> list[int]:
    """Circular order of modules by greedy relative conductance.

    Starts from the largest-volume module and repeatedly appends the unplaced
    module closest (in relative conductance) to the last placed one. Modules
    with zero volume are left out.
    """
    vol = np.bincount(p.assignment, g.degrees, p.m)
    counts = module_edge_counts(g, p)
    live = [i for i in range(p.m) if vol[i] > 0]
    if not live:
        return []
    start = max(live, key=lambda i: (vol[i], -i))
    order = [start]
    left = set(live) - {start}
    while left:
        last = order[-1]
        nxt = max(sorted(left), key=lambda j: counts[last, j] / min(vol[last], vol[j]))
        order.append(nxt)
        left.remove(nxt)
    return order


def angular_init(p: Partition, g: UGraph, rng, padding: float = 0.02) -> np.ndarray:
    """Arc layout: each module gets an arc of width ``2 pi vol / d`` along the chain.

    Nodes are placed uniformly within their module's arc, shrunk by
    ``padding`` of its width. Zero-degree nodes get uniform angles.
    """
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    vol = np.bincount(p.assignment, g.degrees, p.m).astype(float)
    d = vol.sum()
    theta = np.empty(g.n)
    start = np.zeros(p.m)
    width = np.zeros(p.m)
    pos = 0.0
    for mod in module_chain(g, p):
        start[mod] = pos
        width[mod] = TWO_PI * vol[mod] / d
        pos += width[mod]
    u = rng.random(g.n)
    spread = rng.random(g.n) * TWO_PI
    a = p.assignment
    theta = start[a] + width[a] * (0.5 * padding + (1.0 - padding) * u)
    isolated = g.degrees == 0
    theta[isolated] = spread[isolated]
    return np.mod(theta, TWO_PI)


def angular_refine(g: UGraph, r, theta, params: DiskParams, sweeps: int = 3, grid: int = 256) -> np.ndarray:
    """Coordinate-wise angular maximum-likelihood sweeps.

    Nodes are visited by decreasing degree (ties by id). Each node moves to
    whichever of ``grid`` equally spaced angles or its neighbours' current
    angles minimises its full link negative log-likelihood with every other
    node, radii held fixed.
    """
    theta = np.array(theta, dtype=float)
    r = np.asarray(r, dtype=float)
    n = g.n
    if n < 2 or sweeps == 0:
        return theta
    R, s = params.R, 2.0 * params.T
    base = np.arange(grid) * (TWO_PI / grid)
    order = np.argsort(-g.degrees, kind="stable")
    linked = np.zeros(n, dtype=bool)
    for _ in range(sweeps):
        for u in order.tolist():
            nb = g.neighbors(u)
            if len(nb) == 0:
                continue
            cand = np.concatenate([base, theta[nb]])
            d = distance_array(r[u], cand[:, None], r[None, :], theta[None, :])
            x = (R - d) / s
            linked[nb] = True
            # sign flip: softplus(-x) for edges, softplus(x) for non-edges
            z = np.where(linked, -x, x)
            z[:, u] = -np.inf
            nll = np.logaddexp(0.0, z).sum(axis=1)
            linked[nb] = False
            theta[u] = cand[int(np.argmin(nll))]
    return theta


def _softplus(x: float) -> float:
    return x + math.log1p(math.exp(-x)) if x > 0 else math.log1p(math.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def first_order_loss(r, theta, u, v, neg_u, neg_v, R, T, w_u=None, w_v=None) -> float:
    """Negative log-likelihood of edge ``(u, v)`` plus the sampled non-edges.

    ``w_u``/``w_v`` optionally weight each negative term (default 1).
    """
    s = 2.0 * T
    x = (R - distance(r[u], theta[u], r[v], theta[v])) / s
    loss = _softplus(-x)
    for a, negs, ws in ((u, neg_u, w_u), (v, neg_v, w_v)):
        for i, k in enumerate(negs):
            x = (R - distance(r[a], theta[a], r[k], theta[k])) / s
            loss += (1.0 if ws is None else ws[i]) * _softplus(x)
    return loss


def first_order_gradient(r, theta, u, v, neg_u, neg_v, R, T, w_u=None, w_v=None):
    """Euclidean gradient of :func:`first_order_loss` in ``(r_u, t_u, r_v, t_v)``."""
    s = 2.0 * T
    ru, tu, rv, tv = r[u], theta[u], r[v], theta[v]
    coef = (1.0 - _sigmoid((R - distance(ru, tu, rv, tv)) / s)) / s
    dru, dtu = distance_partials_raw(ru, tu, rv, tv)
    drv, dtv = distance_partials_raw(rv, tv, ru, tu)
    g = [coef * dru, coef * dtu, coef * drv, coef * dtv]
    for slot, a, negs, ws in ((0, u, neg_u, w_u), (2, v, neg_v, w_v)):
        ra, ta = r[a], theta[a]
        for i, k in enumerate(negs):
            rk, tk = r[k], theta[k]
            c = -_sigmoid((R - distance(ra, ta, rk, tk)) / s) / s
            if ws is not None:
                c *= ws[i]
            dr, dt = distance_partials_raw(ra, ta, rk, tk)
            g[slot] += c * dr
            g[slot + 1] += c * dt
    return tuple(g)


def _apply_rsgd(r, theta, node, g_r, g_t, lr, R):
    # angular component rescaled by the inverse metric sinh(r)^-2
    sh = math.sinh(r[node])
    rn = r[node] - lr * g_r
    tn = theta[node] - lr * g_t / (sh * sh)
    r[node] = R_MIN if rn < R_MIN else (R if rn > R else rn)
    tn = math.fmod(tn, TWO_PI)
    theta[node] = tn + TWO_PI if tn < 0 else tn


def first_order_step(state: EmbeddingState, u: int, v: int, neg_u, neg_v, lr: float) -> None:
    """One RSGD update of both endpoints of edge ``(u, v)``.

    Gradients are taken at the pre-update point; negatives are not moved.
    """
    if u == v:
        raise ValueError("self-pair")
    R, T = state.params.R, state.params.T
    gru, gtu, grv, gtv = first_order_gradient(state.r, state.theta, u, v, neg_u, neg_v, R, T)
    _apply_rsgd(state.r, state.theta, u, gru, gtu, lr, R)
    _apply_rsgd(state.r, state.theta, v, grv, gtv, lr, R)


def coherence_gradient(theta_u: float, sum_cos: float, sum_sin: float):
    """Quotient-form derivative of a module's resultant length w.r.t. ``theta_u``.

    ``sum_cos``/``sum_sin`` run over the whole module, ``u`` included. The
    value equals ``n_g * d(xi_g)/d(theta_u)``. Returns ``None`` when the
    resultant vanishes.
    """
    norm = math.hypot(sum_cos, sum_sin)
    if norm < 1e-12:
        return None
    return (-math.sin(theta_u) * sum_cos + math.cos(theta_u) * sum_sin) / norm


def coherence_step(state: EmbeddingState, u: int, lr: float, weight: float, members=None) -> bool:
    """Gradient ascent on the coherence of ``u``'s module; returns False if skipped."""
    if members is None:
        members = np.flatnonzero(state.partition.assignment == state.partition.assignment[u])
    th = state.theta[members]
    grad = coherence_gradient(state.theta[u], float(np.cos(th).sum()), float(np.sin(th).sum()))
    if grad is None:
        return False
    state.theta[u] = (state.theta[u] + lr * weight * grad) % TWO_PI
    return True


def geometric_weights(g: UGraph, r, theta, params: DiskParams) -> np.ndarray:
    e = g.edges()
    d = distance_array(r[e[:, 0]], theta[e[:, 0]], r[e[:, 1]], theta[e[:, 1]])
    return np.maximum(connection_probability(d, params), 1e-12)


def link_nll(g: UGraph, r, theta, params: DiskParams, max_pairs: int = 2_000_000, seed: int = 0) -> float:
    """Mean first-order negative log-likelihood over node pairs.

    Exact over all pairs when there are at most ``max_pairs``; otherwise on a
    fixed random pair sample.
    """
    n = g.n
    total = n * (n - 1) // 2
    if total <= max_pairs:
        iu, ju = np.triu_indices(n, 1)
    else:
        rng = make_rng(seed)
        iu = rng.integers(0, n, max_pairs)
        ju = rng.integers(0, n, max_pairs)
        keep = iu != ju
        iu, ju = np.minimum(iu, ju)[keep], np.maximum(iu, ju)[keep]
    d = distance_array(r[iu], theta[iu], r[ju], theta[ju])
    x = (params.R - d) / (2.0 * params.T)
    adj = g.adjacency()
    linked = np.asarray(adj[iu, ju]).ravel() > 0
    z = np.where(linked, -x, x)
    return float(np.mean(np.logaddexp(0.0, z)))


@dataclass
class TraceRow:
    iter: int
    o1: float
    mean_coherence: float
    codelength: float


@dataclass
class FitResult:
    state: EmbeddingState
    partition: Partition
    trace: list[TraceRow] = field(default_factory=list)


class LayerTrainer:
    """SGD machinery for one layer; shared by single-layer and multiplex fits."""

    def __init__(self, g: UGraph, params: DiskParams, cfg: TrainConfig, rng: np.random.Generator,
                 r: np.ndarray, theta: np.ndarray, total_epochs: int):
        self.g = g
        self.params = params
        self.cfg = cfg
        self.rng = rng
        self.r = [float(x) for x in r]
        self.theta = [float(x) for x in theta]
        self.edges = g.edges().tolist()
        w = g.degrees.astype(float) ** 0.75
        self.neg_p = w / w.sum() if w.sum() > 0 else None
        self.neg_scale = None
        if cfg.importance_weights and self.neg_p is not None:
            with np.errstate(divide="ignore"):
                self.inv_p = np.where(self.neg_p > 0, 1.0 / self.neg_p, 0.0).tolist()
                self.neg_scale = np.where(g.degrees > 0, 1.0 / (cfg.negatives * np.maximum(g.degrees, 1)), 0.0).tolist()
        self.nbrs = g.neighbor_sets()
        self.steps_total = max(1, total_epochs * len(self.edges))
        self.step = 0

    def lr(self) -> float:
        frac = min(1.0, self.step / self.steps_total)
        return self.cfg.lr + (self.cfg.lr_final - self.cfg.lr) * frac

    def _negatives(self, node, draws):
        nb = self.nbrs[node]
        negs = [k for k in draws if k != node and k not in nb]
        if self.neg_scale is None:
            return negs, None
        # importance weights turn the sampled sum into an unbiased estimate of
        # the full non-edge gradient, spread over the deg(node) visits per epoch
        c = self.neg_scale[node]
        return negs, [c * self.inv_p[k] for k in negs]

    def edge_epoch(self) -> None:
        m = len(self.edges)
        if m == 0:
            return
        K = self.cfg.negatives
        R, T = self.params.R, self.params.T
        order = self.rng.permutation(m).tolist()
        negs = self.rng.choice(self.g.n, size=(m, 2, K), p=self.neg_p).tolist()
        r, th = self.r, self.theta
        for k, idx in enumerate(order):
            u, v = self.edges[idx]
            nu, wu = self._negatives(u, negs[k][0])
            nv, wv = self._negatives(v, negs[k][1])
            lr = self.lr()
            gru, gtu, grv, gtv = first_order_gradient(r, th, u, v, nu, nv, R, T, wu, wv)
            _apply_rsgd(r, th, u, gru, gtu, lr, R)
            _apply_rsgd(r, th, v, grv, gtv, lr, R)
            self.step += 1

    def coherence_pass(self, assignment: np.ndarray, nodes=None) -> int:
        """One ascent step per node on its module coherence; returns skip count."""
        weight = self.cfg.coherence_weight
        if weight == 0:
            return 0
        a = assignment.tolist()
        m = int(assignment.max()) + 1
        th = self.theta
        if nodes is None:
            nodes = range(self.g.n)
        nodes = list(nodes)
        sc = [0.0] * m
        ss = [0.0] * m
        for i in nodes:
            sc[a[i]] += math.cos(th[i])
            ss[a[i]] += math.sin(th[i])
        lr = self.lr()
        skipped = 0
        for i in self.rng.permutation(nodes).tolist():
            g_ = a[i]
            grad = coherence_gradient(th[i], sc[g_], ss[g_])
            if grad is None:
                skipped += 1
                continue
            old = th[i]
            new = math.fmod(old + lr * weight * grad, TWO_PI)
            if new < 0:
                new += TWO_PI
            th[i] = new
            sc[g_] += math.cos(new) - math.cos(old)
            ss[g_] += math.sin(new) - math.sin(old)
        return skipped

    def arrays(self):
        return np.array(self.r), np.array(self.theta)


def refresh_communities(g: UGraph, r, theta, params: DiskParams, seed: int,
                        options: OptimizerOptions | None = None):
    """Map-equation partition of ``g`` with edges weighted by link probability."""
    fg = FlowGraph.undirected(g.n, g.edges(), geometric_weights(g, r, theta, params))
    res = optimize_flow(fg, seed, options)
    return res.partition.with_graph(g), res.codelength


def fit(g: UGraph, params: DiskParams, cfg: TrainConfig | None = None,
        options: OptimizerOptions | None = None) -> FitResult:
    """Embed ``g`` on the disk described by ``params``."""
    cfg = cfg or TrainConfig()
    if params.n != g.n:
        raise ValueError(f"params.n={params.n} but graph has {g.n} nodes")
    if g.m == 0:
        raise ValueError("graph has no edges")
    ncomp, _ = g.components()
    if ncomp > 1:
        warnings.warn(f"graph has {ncomp} components; embedding them on a common disk", stacklevel=2)
    rng = make_rng(cfg.seed)
    part = optimize(g, int(rng.integers(2**63)), options)
    r = radial_init_all(g.degrees, params)
    theta = angular_init(part, g, rng, cfg.arc_padding)
    theta = angular_refine(g, r, theta, params, cfg.refine_sweeps, cfg.refine_grid)
    trainer = LayerTrainer(g, params, cfg, rng, r, theta, cfg.outer_iters * cfg.epochs)
    trace = []
    for it in range(cfg.outer_iters):
        for _ in range(cfg.epochs):
            trainer.edge_epoch()
        trainer.coherence_pass(part.assignment)
        r, theta = trainer.arrays()
        part, cl = refresh_communities(g, r, theta, params, int(rng.integers(2**63)), options)
        row = TraceRow(it, link_nll(g, r, theta, params), coherence(part, theta).mean, cl)
        trace.append(row)
        log.debug("iter %d: O1=%.5f xi=%.4f L=%.4f", it, row.o1, row.mean_coherence, row.codelength)
    state = EmbeddingState(r, theta, params, part, cfg.outer_iters)
    state.project()
    return FitResult(state, part, trace)
