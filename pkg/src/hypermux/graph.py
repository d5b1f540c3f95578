"""Undirected simple graphs, volumes, cuts and conductance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateSet, OverlappingSets


class UGraph:
    """Immutable undirected, unweighted simple graph on nodes ``0..n-1``.

    Adjacency is stored CSR-style with sorted neighbour lists. Self-loops and
    duplicate edges are dropped on construction.
    """

    __slots__ = ("n", "indptr", "indices", "degrees", "_edges", "_nbr_sets")

    def __init__(self, n: int, edges=()):
        self.n = int(n)
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if len(e) and (e.min() < 0 or e.max() >= self.n):
            raise ValueError("edge endpoint out of range")
        e = e[e[:, 0] != e[:, 1]]
        e = np.sort(e, axis=1)
        e = np.unique(e, axis=0) if len(e) else e
        self._edges = e
        both = np.concatenate([e, e[:, ::-1]]) if len(e) else e
        order = np.lexsort((both[:, 1], both[:, 0])) if len(both) else np.zeros(0, dtype=np.int64)
        both = both[order]
        self.degrees = np.bincount(both[:, 0], minlength=self.n).astype(np.int64) if len(both) else np.zeros(self.n, dtype=np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(self.degrees)]).astype(np.int64)
        self.indices = both[:, 1].copy() if len(both) else np.zeros(0, dtype=np.int64)
        self._nbr_sets = None

    @classmethod
    def from_adjacency(cls, a) -> "UGraph":
        a = sp.coo_matrix(a)
        mask = a.row < a.col
        return cls(a.shape[0], np.column_stack([a.row[mask], a.col[mask]]))

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def total_degree(self) -> int:
        return 2 * self.m

    def edges(self) -> np.ndarray:
        """``(m, 2)`` array of edges with ``u < v``, sorted lexicographically."""
        return self._edges

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def neighbor_sets(self) -> list[set]:
        if self._nbr_sets is None:
            self._nbr_sets = [set(self.neighbors(u).tolist()) for u in range(self.n)]
        return self._nbr_sets

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def components(self) -> tuple[int, np.ndarray]:
        return connected_components(self.adjacency(), directed=False)

    def is_connected(self) -> bool:
        return self.components()[0] <= 1

    def without_edges(self, drop: np.ndarray) -> "UGraph":
        """Copy of the graph with the given ``(k, 2)`` edges removed."""
        key = self._edges[:, 0] * self.n + self._edges[:, 1]
        d = np.sort(np.asarray(drop, dtype=np.int64).reshape(-1, 2), axis=1)
        dkey = d[:, 0] * self.n + d[:, 1]
        return UGraph(self.n, self._edges[~np.isin(key, dkey)])

    def subgraph_edges(self, nodes) -> np.ndarray:
        mask = as_mask(self, nodes)
        e = self._edges
        return e[mask[e[:, 0]] & mask[e[:, 1]]]

    def __eq__(self, other):
        return (
            isinstance(other, UGraph)
            and self.n == other.n
            and np.array_equal(self._edges, other._edges)
        )

    def __hash__(self):
        return hash((self.n, self._edges.tobytes()))

    def __repr__(self):
        return f"UGraph(n={self.n}, m={self.m})"


def as_mask(g: UGraph, s) -> np.ndarray:
    """Boolean membership mask for a node set given as mask or id iterable."""
    if isinstance(s, np.ndarray) and s.dtype == bool:
        if s.shape != (g.n,):
            raise ValueError("mask has wrong length")
        return s
    mask = np.zeros(g.n, dtype=bool)
    ids = np.fromiter(s, dtype=np.int64) if not isinstance(s, np.ndarray) else s.astype(np.int64)
    if len(ids) and (ids.min() < 0 or ids.max() >= g.n):
        raise ValueError("node id out of range")
    mask[ids] = True
    return mask


def volume(g: UGraph, s) -> int:
    return int(g.degrees[as_mask(g, s)].sum())


def cut(g: UGraph, s) -> int:
    mask = as_mask(g, s)
    e = g.edges()
    return int(np.count_nonzero(mask[e[:, 0]] != mask[e[:, 1]]))


def edges_between(g: UGraph, a, b) -> int:
    ma, mb = as_mask(g, a), as_mask(g, b)
    if np.any(ma & mb):
        raise OverlappingSets("node sets overlap")
    e = g.edges()
    x, y = e[:, 0], e[:, 1]
    return int(np.count_nonzero((ma[x] & mb[y]) | (mb[x] & ma[y])))


def conductance(g: UGraph, s) -> float:
    mask = as_mask(g, s)
    vs = volume(g, mask)
    vc = volume(g, ~mask)
    if vs == 0 or vc == 0:
        raise DegenerateSet("set or complement has zero volume")
    return cut(g, mask) / min(vs, vc)


def relative_conductance(g: UGraph, a, b) -> float:
    ma, mb = as_mask(g, a), as_mask(g, b)
    va, vb = volume(g, ma), volume(g, mb)
    if va == 0 or vb == 0:
        raise DegenerateSet("a set has zero volume")
    return edges_between(g, ma, mb) / min(va, vb)


@dataclass
class SectorOrderingResult:
    successes: int
    ties: int
    trials: int
    resampled: int
    rab: list[float] = field(default_factory=list)
    rac: list[float] = field(default_factory=list)

    @property
    def fraction(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")


def sector_ordering_experiment(params, sector_angles, trials: int, seed: int = 0,
                               max_resample: int = 1000) -> SectorOrderingResult:
    """Monte-Carlo test of ``R(A, B) > R(A, C)`` for consecutive sectors.

    Sector A starts at angle 0, B follows A and C follows B. Each trial draws
    a fresh random hyperbolic graph; trials where a sector has zero volume are
    resampled. Ties count as failures.
    """
    from .rhg import generate

    da, db, dc = (float(x) for x in sector_angles)
    if min(da, db, dc) <= 0 or da + db + dc > 2 * math.pi + 1e-12:
        raise ValueError("sector angles must be positive and sum to at most 2*pi")
    bounds = np.cumsum([0.0, da, db, dc])
    seeds = np.random.SeedSequence(seed)
    res = SectorOrderingResult(0, 0, 0, 0)
    while res.trials < trials:
        if res.resampled > max_resample:
            raise DegenerateSet("too many trials with empty sectors")
        child = int(seeds.spawn(1)[0].generate_state(1, dtype=np.uint64)[0])
        sample = generate(params, child)
        th = sample.theta
        masks = [(th >= bounds[i]) & (th < bounds[i + 1]) for i in range(3)]
        g = sample.graph
        if any(volume(g, m) == 0 for m in masks):
            res.resampled += 1
            continue
        rab = relative_conductance(g, masks[0], masks[1])
        rac = relative_conductance(g, masks[0], masks[2])
        res.rab.append(rab)
        res.rac.append(rac)
        res.trials += 1
        if rab > rac:
            res.successes += 1
        elif rab == rac:
            res.ties += 1
    return res
