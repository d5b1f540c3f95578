"""Two-level map equation: codelength, greedy optimizer and diagnostics.

Flows are described by a :class:`FlowGraph`: per-node visit rates, the flow
a node sends out of itself when alone, and symmetric pairwise flows
``f(a->b) + f(b->a)``. An unweighted undirected graph gives visit rates
``deg/d`` and module exit rates ``cut/d``; weighted and directed (state)
graphs reuse the same machinery.

Codelengths are in bits and include the partition-independent node entropy,
so a one-module partition costs exactly ``H(deg/d)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import UGraph

LOG2 = math.log(2.0)


def plogp(x: float) -> float:
    return x * math.log2(x) if x > 0.0 else 0.0


def _plogp_array(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


def entropy_bits(p) -> float:
    return float(-_plogp_array(p).sum())


class FlowGraph:
    """Flow network consumed by the map-equation optimizer.

    Attributes
    ----------
    node_flow : visit rate of each node (sums to 1)
    exit_alone : flow leaving each node when it forms its own module
    indptr, indices, data : symmetric CSR of pairwise flows, no diagonal
    node_entropy : ``-sum p log2 p`` over the original (finest) nodes
    physical : optional sparse (n, P) matrix of the flow each node holds of
        every physical node. When set, module codebooks code physical nodes,
        so two states of one physical node in the same module share a codeword.
    """

    def __init__(self, node_flow, exit_alone, sym: sp.csr_matrix, node_entropy=None, physical=None):
        self.node_flow = np.asarray(node_flow, dtype=float)
        self.exit_alone = np.asarray(exit_alone, dtype=float)
        sym = sp.csr_matrix(sym)
        sym.setdiag(0.0)
        sym.eliminate_zeros()
        sym.sort_indices()
        self.sym = sym
        self.n = len(self.node_flow)
        self.node_entropy = entropy_bits(self.node_flow) if node_entropy is None else node_entropy
        self.physical = None if physical is None else sp.csr_matrix(physical)

    @classmethod
    def from_ugraph(cls, g: UGraph) -> "FlowGraph":
        if g.m == 0:
            raise ValueError("graph has no edges")
        return cls.undirected(g.n, g.edges(), None)

    @classmethod
    def undirected(cls, n: int, edges, weights=None) -> "FlowGraph":
        """Random-walk flows on an undirected graph with optional weights."""
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = np.ones(len(e)) if weights is None else np.asarray(weights, dtype=float)
        total = float(w.sum())
        if total <= 0:
            raise ValueError("total edge weight must be positive")
        strength = np.bincount(e[:, 0], w, n) + np.bincount(e[:, 1], w, n)
        p = strength / (2.0 * total)
        sym = sp.coo_matrix((np.concatenate([w, w]) / total,
                             (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
                            shape=(n, n)).tocsr()
        return cls(p, p.copy(), sym)

    @classmethod
    def from_transitions(cls, stationary, transitions, physical_of=None, n_physical=None) -> "FlowGraph":
        """Flows of a Markov chain with the given stationary distribution.

        ``physical_of`` maps each chain state to a physical node id (see the
        ``physical`` attribute); ``n_physical`` defaults to ``max + 1``.
        """
        pi = np.asarray(stationary, dtype=float)
        F = sp.diags(pi) @ sp.csr_matrix(transitions)
        F = sp.csr_matrix(F)
        out = np.asarray(F.sum(axis=1)).ravel()
        self_flow = F.diagonal()
        sym = F + F.T
        phys = None
        if physical_of is not None:
            physical_of = np.asarray(physical_of, dtype=np.int64)
            P = int(physical_of.max()) + 1 if n_physical is None else int(n_physical)
            phys = sp.csr_matrix((pi, (np.arange(len(pi)), physical_of)), shape=(len(pi), P))
        return cls(pi, out - self_flow, sym, physical=phys)

    def aggregate(self, assignment: np.ndarray, m: int) -> "FlowGraph":
        """Collapse modules into super-nodes."""
        n = self.n
        H = sp.csr_matrix((np.ones(n), (np.arange(n), assignment)), shape=(n, m))
        S = (H.T @ self.sym @ H).tocsr()
        internal = 0.5 * S.diagonal()
        p = np.bincount(assignment, self.node_flow, m)
        e = np.bincount(assignment, self.exit_alone, m) - internal
        phys = None if self.physical is None else H.T @ self.physical
        return FlowGraph(p, np.maximum(e, 0.0), S, self.node_entropy, phys)

    def codeword_entropy(self, assignment: np.ndarray, m: int) -> float:
        """``-sum plogp`` over the codewords of all module codebooks."""
        if self.physical is None:
            return self.node_entropy
        H = sp.csr_matrix((np.ones(self.n), (np.arange(self.n), assignment)), shape=(self.n, m))
        return -float(_plogp_array((H.T @ self.physical).tocsr().data).sum())

    def module_exit(self, assignment: np.ndarray, m: int) -> np.ndarray:
        coo = self.sym.tocoo()
        same = assignment[coo.row] == assignment[coo.col]
        internal = 0.5 * np.bincount(assignment[coo.row[same]], coo.data[same], m)
        return np.maximum(np.bincount(assignment, self.exit_alone, m) - internal, 0.0)

    def neighbor_lists(self):
        ip, ix, dx = self.sym.indptr, self.sym.indices.tolist(), self.sym.data.tolist()
        return ([ix[ip[i]:ip[i + 1]] for i in range(self.n)],
                [dx[ip[i]:ip[i + 1]] for i in range(self.n)])


def relabel_dense(labels) -> tuple[np.ndarray, int]:
    """Map arbitrary labels to ``0..m-1`` in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64), len(first)


@dataclass
class Partition:
    """Node-to-module assignment with optional per-module cut/volume caches."""

    assignment: np.ndarray
    cut: np.ndarray | None = None
    vol: np.ndarray | None = None

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)

    @classmethod
    def from_labels(cls, labels, graph: UGraph | None = None) -> "Partition":
        a, m = relabel_dense(labels)
        if graph is None:
            return cls(a)
        return cls(a, *_cut_vol(graph, a, m))

    @classmethod
    def singletons(cls, n: int, graph: UGraph | None = None) -> "Partition":
        return cls.from_labels(np.arange(n), graph)

    @property
    def m(self) -> int:
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0

    @property
    def n(self) -> int:
        return len(self.assignment)

    def modules(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.m + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.m)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.m)

    def with_graph(self, graph: UGraph) -> "Partition":
        return Partition(self.assignment, *_cut_vol(graph, self.assignment, self.m))

    def move(self, graph: UGraph, node: int, module: int) -> None:
        """Reassign one node, updating caches in place."""
        old = int(self.assignment[node])
        if module == old:
            return
        if module >= self.m:
            raise ValueError("module must already exist")
        nb = self.assignment[graph.neighbors(node)]
        deg = int(graph.degrees[node])
        to_old = int(np.count_nonzero(nb == old))
        to_new = int(np.count_nonzero(nb == module))
        self.vol[old] -= deg
        self.vol[module] += deg
        self.cut[old] += 2 * to_old - deg
        self.cut[module] += deg - 2 * to_new
        self.assignment[node] = module

    def check(self, graph: UGraph) -> bool:
        """Recompute caches from scratch and compare."""
        c, v = _cut_vol(graph, self.assignment, len(self.cut))
        return bool(np.array_equal(c, self.cut) and np.array_equal(v, self.vol))

    def same_as(self, other: "Partition") -> bool:
        """Equality up to relabelling of modules."""
        a, _ = relabel_dense(self.assignment)
        b, _ = relabel_dense(other.assignment)
        return bool(np.array_equal(a, b))


def _cut_vol(g: UGraph, a: np.ndarray, m: int):
    vol = np.bincount(a, g.degrees, m).astype(np.int64)
    e = g.edges()
    cross = a[e[:, 0]] != a[e[:, 1]]
    cut = (np.bincount(a[e[cross, 0]], minlength=m) + np.bincount(a[e[cross, 1]], minlength=m)).astype(np.int64)
    return cut, vol


@dataclass(frozen=True)
class Codelength:
    index: float
    module: float

    @property
    def value(self) -> float:
        return self.index + self.module

    def __float__(self):
        return self.value


def flow_codelength(fg: FlowGraph, assignment) -> Codelength:
    assignment = np.asarray(assignment, dtype=np.int64)
    m = int(assignment.max()) + 1
    q = fg.module_exit(assignment, m)
    p = np.bincount(assignment, fg.node_flow, m)
    sum_q = float(q.sum())
    sum_qlogq = float(_plogp_array(q).sum())
    index = plogp(sum_q) - sum_qlogq
    module = float(_plogp_array(q + p).sum()) - sum_qlogq + fg.codeword_entropy(assignment, m)
    return Codelength(max(index, 0.0), max(module, 0.0))


def codelength(g: UGraph, p: Partition) -> Codelength:
    """Full two-level codelength of ``p`` on an unweighted graph."""
    if not g.is_connected():
        warnings.warn("graph is disconnected; visit rates stay degree-proportional", stacklevel=2)
    return flow_codelength(FlowGraph.from_ugraph(g), p.assignment)


def expanded_codelength(g: UGraph, p: Partition) -> float:
    """Partition-dependent part only: full codelength minus ``H(deg/d)``."""
    fg = FlowGraph.from_ugraph(g)
    return flow_codelength(fg, p.assignment).value - fg.node_entropy


class MapEquationState:
    """Module bookkeeping for local moves with O(degree) codelength deltas."""

    def __init__(self, fg: FlowGraph, assignment=None):
        self.fg = fg
        n = fg.n
        self.nbrs, self.wts = fg.neighbor_lists()
        self.flow = fg.node_flow.tolist()
        self.exit = fg.exit_alone.tolist()
        if assignment is None:
            assignment = np.arange(n)
        a, m = relabel_dense(assignment)
        self.mod = a.tolist()
        q = fg.module_exit(a, m) if n else np.zeros(0)
        # one slot per node so that every node can always open an empty module
        self.mod_exit = q.tolist() + [0.0] * (n - m)
        self.mod_flow = np.bincount(a, fg.node_flow, m).tolist() + [0.0] * (n - m)
        self.mod_size = np.bincount(a, minlength=m).tolist() + [0] * (n - m)
        self.empty = list(range(n - 1, m - 1, -1))
        self.sum_exit = float(sum(self.mod_exit))
        self.sum_plogp_exit = sum(plogp(x) for x in self.mod_exit)
        self.sum_plogp_tot = sum(plogp(x + y) for x, y in zip(self.mod_exit, self.mod_flow))
        self.phys = None
        if fg.physical is not None:
            ph = fg.physical
            ip, ix, dx = ph.indptr, ph.indices.tolist(), ph.data.tolist()
            self.phys = [list(zip(ix[ip[i]:ip[i + 1]], dx[ip[i]:ip[i + 1]])) for i in range(n)]
            self.mod_phys: list[dict] = [{} for _ in range(n)]
            for i, mi in enumerate(self.mod):
                d = self.mod_phys[mi]
                for u, f in self.phys[i]:
                    d[u] = d.get(u, 0.0) + f
            self.sum_plogp_phys = sum(plogp(f) for d in self.mod_phys for f in d.values())

    @property
    def codelength(self) -> float:
        words = self.fg.node_entropy if self.phys is None else -self.sum_plogp_phys
        return plogp(self.sum_exit) - 2.0 * self.sum_plogp_exit + words + self.sum_plogp_tot

    def _phys_delta(self, node, src, dst) -> float:
        a, b = self.mod_phys[src], self.mod_phys[dst]
        d = 0.0
        for u, f in self.phys[node]:
            fa, fb = a.get(u, 0.0), b.get(u, 0.0)
            d += plogp(max(fa - f, 0.0)) - plogp(fa) + plogp(fb + f) - plogp(fb)
        return d

    def links_to_modules(self, node: int) -> dict:
        links: dict[int, float] = {}
        mod = self.mod
        for b, w in zip(self.nbrs[node], self.wts[node]):
            mb = mod[b]
            links[mb] = links.get(mb, 0.0) + w
        return links

    def delta(self, node: int, target: int, links: dict | None = None) -> float:
        """Codelength change if ``node`` moves to module ``target``."""
        src = self.mod[node]
        if target == src:
            return 0.0
        if links is None:
            links = self.links_to_modules(node)
        return self._delta(node, src, target, links.get(src, 0.0), links.get(target, 0.0))

    def _delta(self, node, src, dst, w_src, w_dst):
        e, p = self.exit[node], self.flow[node]
        qa, pa = self.mod_exit[src], self.mod_flow[src]
        qb, pb = self.mod_exit[dst], self.mod_flow[dst]
        qa2 = qa - e + w_src
        qb2 = qb + e - w_dst
        d_sum = (qa2 - qa) + (qb2 - qb)
        d_exit = plogp(qa2) - plogp(qa) + plogp(qb2) - plogp(qb)
        d_tot = plogp(qa2 + pa - p) - plogp(qa + pa) + plogp(qb2 + pb + p) - plogp(qb + pb)
        out = plogp(self.sum_exit + d_sum) - plogp(self.sum_exit) - 2.0 * d_exit + d_tot
        if self.phys is not None:
            out -= self._phys_delta(node, src, dst)
        return out

    def move(self, node: int, dst: int, links: dict | None = None) -> None:
        src = self.mod[node]
        if dst == src:
            return
        if links is None:
            links = self.links_to_modules(node)
        e, p = self.exit[node], self.flow[node]
        qa, pa = self.mod_exit[src], self.mod_flow[src]
        qb, pb = self.mod_exit[dst], self.mod_flow[dst]
        qa2 = max(qa - e + links.get(src, 0.0), 0.0)
        qb2 = max(qb + e - links.get(dst, 0.0), 0.0)
        self.sum_exit += (qa2 - qa) + (qb2 - qb)
        self.sum_plogp_exit += plogp(qa2) - plogp(qa) + plogp(qb2) - plogp(qb)
        self.sum_plogp_tot += (plogp(qa2 + pa - p) - plogp(qa + pa)
                               + plogp(qb2 + pb + p) - plogp(qb + pb))
        if self.phys is not None:
            self.sum_plogp_phys += self._phys_delta(node, src, dst)
            a, b = self.mod_phys[src], self.mod_phys[dst]
            for u, f in self.phys[node]:
                left = a.get(u, 0.0) - f
                # drop entries that only hold rounding residue
                if left <= 1e-15 * f:
                    a.pop(u, None)
                else:
                    a[u] = left
                b[u] = b.get(u, 0.0) + f
        self.mod_exit[src], self.mod_flow[src] = qa2, pa - p
        self.mod_exit[dst], self.mod_flow[dst] = qb2, pb + p
        if self.mod_size[dst] == 0:
            self.empty.remove(dst)
        self.mod_size[src] -= 1
        self.mod_size[dst] += 1
        if self.mod_size[src] == 0:
            self.empty.append(src)
        self.mod[node] = dst

    def best_move(self, node: int, eps: float):
        """Best strictly improving target, lowest module id on ties."""
        src = self.mod[node]
        links = self.links_to_modules(node)
        w_src = links.get(src, 0.0)
        best, best_delta = src, -eps
        for dst in sorted(links):
            if dst == src:
                continue
            d = self._delta(node, src, dst, w_src, links[dst])
            if d < best_delta:
                best, best_delta = dst, d
        if self.mod_size[src] > 1 and self.empty:
            dst = self.empty[-1]
            d = self._delta(node, src, dst, w_src, 0.0)
            if d < best_delta:
                best, best_delta = dst, d
        return best, best_delta, links

    def local_moving(self, rng: np.random.Generator, eps: float, max_sweeps: int = 100) -> int:
        """Sweep nodes in shuffled order until no improving move remains."""
        total = 0
        # isolated nodes never move
        active = [i for i in range(self.fg.n) if self.nbrs[i]]
        for _ in range(max_sweeps):
            moved = 0
            for node in rng.permutation(active).tolist():
                dst, _, links = self.best_move(node, eps)
                if dst != self.mod[node]:
                    self.move(node, dst, links)
                    moved += 1
            total += moved
            if moved == 0:
                break
        return total

    def assignment(self) -> tuple[np.ndarray, int]:
        return relabel_dense(self.mod)


@dataclass
class OptimizerOptions:
    eps: float = 1e-10
    max_outer: int = 100
    max_sweeps: int = 100
    trials: int = 1
    refine: bool = True


@dataclass
class OptimizeResult:
    partition: Partition
    codelength: float
    trace: list[float] = field(default_factory=list)


def _coarsen(fg: FlowGraph, top: np.ndarray, rng, opts: OptimizerOptions, trace: list) -> np.ndarray:
    a, m = relabel_dense(top)
    level = fg.aggregate(a, m) if m < fg.n else fg
    top = a
    for _ in range(opts.max_outer):
        state = MapEquationState(level)
        moves = state.local_moving(rng, opts.eps, opts.max_sweeps)
        trace.append(flow_codelength(fg, state.assignment()[0][top]).value)
        if moves == 0:
            break
        assign, m = state.assignment()
        top = assign[top]
        if m == level.n:
            break
        level = level.aggregate(assign, m)
    return relabel_dense(top)[0]


def _run_trial(fg: FlowGraph, rng, opts: OptimizerOptions, trace: list) -> np.ndarray:
    top = _coarsen(fg, np.arange(fg.n), rng, opts, trace)
    if not opts.refine:
        return top
    best = flow_codelength(fg, top).value
    for _ in range(opts.max_outer):
        state = MapEquationState(fg, top)
        if state.local_moving(rng, opts.eps, opts.max_sweeps) == 0:
            break
        local: list[float] = []
        candidate = _coarsen(fg, state.assignment()[0], rng, opts, local)
        value = flow_codelength(fg, candidate).value
        if value >= best - opts.eps:
            break
        trace.extend(local)
        top, best = candidate, value
    return top


def optimize_flow(fg: FlowGraph, seed: int = 0, options: OptimizerOptions | None = None) -> OptimizeResult:
    """Louvain-style local moving and aggregation on an arbitrary flow graph."""
    opts = options or OptimizerOptions()
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    best, best_value, best_trace = None, math.inf, []
    for _ in range(max(1, opts.trials)):
        trace: list[float] = []
        top = _run_trial(fg, rng, opts, trace)
        value = flow_codelength(fg, top).value
        if value < best_value - opts.eps:
            best, best_value, best_trace = top, value, trace
    return OptimizeResult(Partition.from_labels(best), best_value, best_trace)


def optimize(g: UGraph | FlowGraph, seed: int = 0, options: OptimizerOptions | None = None) -> Partition:
    """Minimise the map equation; returns a dense partition.

    For a :class:`UGraph` the returned partition carries cut/volume caches.
    """
    if isinstance(g, FlowGraph):
        return optimize_flow(g, seed, options).partition
    if g.m < 1:
        raise ValueError("need at least one edge")
    res = optimize_flow(FlowGraph.from_ugraph(g), seed, options)
    return res.partition.with_graph(g)


def predict_module_count(L: int, base: float = 2.0) -> int:
    """Resolution-limit scale ``L / log L`` (log base 2 by default)."""
    if L < 2:
        raise ValueError("need at least two links")
    return int(round(L / (math.log(L) / math.log(base))))


@dataclass
class BalanceReport:
    cut_plus_vol: np.ndarray
    dispersion: float
    nu: float
    undefined: list[int]


def balance_diagnostic(g: UGraph, p: Partition) -> BalanceReport:
    """Edge-balance summary: per-module ``cut + vol``, its CV and max conductance."""
    part = p if p.cut is not None else p.with_graph(g)
    size = (part.cut + part.vol).astype(float)
    mean = size.mean()
    dispersion = float(size.std() / mean) if mean > 0 else 0.0
    defined = part.vol > 0
    nu = float(np.max(part.cut[defined] / part.vol[defined])) if defined.any() else float("nan")
    return BalanceReport(size, dispersion, nu, np.flatnonzero(~defined).tolist())


@dataclass
class CoherenceReport:
    per_module: np.ndarray
    mean: float
    empty: list[int]


def module_coherence(theta) -> float:
    theta = np.asarray(theta, dtype=float)
    if len(theta) == 0:
        return float("nan")
    return float(math.hypot(np.cos(theta).sum(), np.sin(theta).sum()) / len(theta))


def coherence(p: Partition, theta, m: int | None = None) -> CoherenceReport:
    """Resultant length of the unit angle vectors of each module."""
    theta = np.asarray(theta, dtype=float)
    if len(theta) != p.n:
        raise ValueError("one angle per node required")
    m = p.m if m is None else m
    cs = np.bincount(p.assignment, np.cos(theta), m)
    sn = np.bincount(p.assignment, np.sin(theta), m)
    size = np.bincount(p.assignment, minlength=m)
    empty = np.flatnonzero(size == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        xi = np.minimum(np.hypot(cs, sn) / size, 1.0)
    kept = xi[size > 0]
    return CoherenceReport(xi, float(kept.mean()) if len(kept) else float("nan"), empty.tolist())
