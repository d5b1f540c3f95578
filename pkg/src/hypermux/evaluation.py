"""Experiment harness: HD-correlation, link prediction, coherence and resolution tables."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import PoolExhausted, UndefinedCorrelation
from .geometry import DiskParams, distance_array, pairwise_distances
from .graph import UGraph
from .mapeq import OptimizerOptions, Partition, coherence, optimize, predict_module_count
from .rhg import generate, make_rng


def _coords(points):
    if isinstance(points, tuple) and len(points) == 2:
        return np.asarray(points[0], dtype=float), np.asarray(points[1], dtype=float)
    arr = np.array([(p.r, p.theta) for p in points], dtype=float)
    return arr[:, 0], arr[:, 1]


def hd_correlation(truth, inferred) -> float:
    """Pearson correlation of all pairwise hyperbolic distances.

    Arguments are sequences of :class:`PolarPoint` or ``(r, theta)`` array pairs.
    """
    r1, t1 = _coords(truth)
    r2, t2 = _coords(inferred)
    if len(r1) != len(r2):
        raise ValueError("node sets differ in size")
    if len(r1) < 3:
        raise ValueError("need at least three nodes")
    a = pairwise_distances(r1, t1)
    b = pairwise_distances(r2, t2)
    scale_a, scale_b = np.abs(a).max(), np.abs(b).max()
    a = a - a.mean()
    b = b - b.mean()
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    # rounding leaves ~1e-16 relative spread in exactly constant vectors
    if na <= 1e-12 * scale_a * math.sqrt(len(a)) or nb <= 1e-12 * scale_b * math.sqrt(len(b)):
        raise UndefinedCorrelation("pairwise distances have zero variance")
    return float(a @ b) / (na * nb)


# -- link prediction -------------------------------------------------------


def auc_score(pos, neg) -> float:
    """Probability a positive outscores a negative, ties counted one half."""
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need positive and negative scores")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def common_neighbors(g: UGraph):
    sets = g.neighbor_sets()
    return lambda u, v: float(len(sets[u] & sets[v]))


def jaccard(g: UGraph):
    sets = g.neighbor_sets()

    def score(u, v):
        union = len(sets[u] | sets[v])
        return len(sets[u] & sets[v]) / union if union else 0.0

    return score


def adamic_adar(g: UGraph):
    sets = g.neighbor_sets()
    deg = g.degrees

    def score(u, v):
        # a common neighbour has degree >= 2, so the log is positive
        return float(sum(1.0 / math.log(deg[w]) for w in sets[u] & sets[v]))

    return score


class HyperbolicScorer:
    """Score ``-d(u, v)`` under an embedding fitted on the training graph."""

    def __init__(self, params_fn=None, cfg=None, options: OptimizerOptions | None = None):
        self.params_fn = params_fn
        self.cfg = cfg
        self.options = options
        self.state = None

    def __call__(self, g: UGraph):
        from .embed import estimate_params, fit

        params = self.params_fn(g) if self.params_fn is not None else estimate_params(g)
        res = fit(g, params, self.cfg, self.options)
        self.state = res.state
        r, th = res.state.r, res.state.theta
        return lambda u, v: -float(distance_array(r[u], th[u], r[v], th[v]))


SCORERS = {"cn": common_neighbors, "jaccard": jaccard, "aa": adamic_adar}


@dataclass
class HoldoutSplit:
    train: UGraph
    positives: np.ndarray
    negatives: np.ndarray
    attempts: int


def holdout_split(g: UGraph, holdout_frac: float = 0.1, seed: int = 0, max_tries: int = 100) -> HoldoutSplit:
    """Remove ``ceil(frac |E|)`` edges and draw as many non-edges of ``g``.

    Removals are redrawn until the training graph has no more components than
    ``g``; after ``max_tries`` failures the last draw is kept with a warning.
    """
    if not 0.0 < holdout_frac <= 0.5:
        raise ValueError("holdout_frac must lie in (0, 0.5]")
    rng = make_rng(seed)
    e = g.edges()
    k = math.ceil(holdout_frac * g.m)
    n_pairs = g.n * (g.n - 1) // 2
    if n_pairs - g.m < k:
        raise PoolExhausted(f"need {k} non-edges but only {n_pairs - g.m} exist")
    base, _ = g.components()
    for attempt in range(1, max_tries + 1):
        pick = np.sort(rng.choice(g.m, size=k, replace=False))
        train = g.without_edges(e[pick])
        if train.components()[0] <= base:
            break
    else:
        warnings.warn(f"could not keep the graph connected in {max_tries} tries", stacklevel=2)
    neg = _sample_non_edges(g, k, rng)
    return HoldoutSplit(train, e[pick], neg, attempt)


def _sample_non_edges(g: UGraph, k: int, rng) -> np.ndarray:
    n = g.n
    edge_keys = set((g.edges()[:, 0] * n + g.edges()[:, 1]).tolist())
    out: list[tuple[int, int]] = []
    seen = set()
    n_pairs = n * (n - 1) // 2
    if 4 * k > n_pairs - g.m:
        # dense regime: enumerate the pool instead of rejection sampling
        iu, ju = np.triu_indices(n, 1)
        keys = iu * n + ju
        pool = np.flatnonzero(~np.isin(keys, list(edge_keys)))
        pick = np.sort(rng.choice(len(pool), size=k, replace=False))
        return np.column_stack([iu[pool[pick]], ju[pool[pick]]])
    while len(out) < k:
        u, v = rng.integers(0, n, size=2).tolist()
        if u == v:
            continue
        if u > v:
            u, v = v, u
        key = u * n + v
        if key in edge_keys or key in seen:
            continue
        seen.add(key)
        out.append((u, v))
    return np.array(out, dtype=np.int64)


@dataclass
class LinkPredictionResult:
    auc: float
    n_pos: int
    n_neg: int
    attempts: int


def link_prediction(g: UGraph, scorer, holdout_frac: float = 0.1, seed: int = 0) -> LinkPredictionResult:
    """Balanced AUC of a scorer on held-out edges vs. sampled non-edges.

    ``scorer`` is a name from ``SCORERS`` or a callable taking the training
    graph and returning a ``score(u, v)`` function.
    """
    split = holdout_split(g, holdout_frac, seed)
    make = SCORERS[scorer] if isinstance(scorer, str) else scorer
    score = make(split.train)
    pos = [score(int(u), int(v)) for u, v in split.positives]
    neg = [score(int(u), int(v)) for u, v in split.negatives]
    return LinkPredictionResult(auc_score(pos, neg), len(pos), len(neg), split.attempts)


# -- tables ----------------------------------------------------------------


def infomap_clusterer(g: UGraph, theta, seed: int) -> Partition:
    return optimize(g, seed)


def random_clusterer(g: UGraph, theta, seed: int) -> Partition:
    """Control: uniform random labels with ``round(sqrt(n))`` modules."""
    k = max(1, round(math.sqrt(g.n)))
    return Partition.from_labels(make_rng(seed).integers(0, k, g.n))


CLUSTERERS = {"infomap": infomap_clusterer, "random": random_clusterer}


@dataclass
class CoherenceRow:
    N: int
    mean_coherence: float
    instances: int
    seeds: list = field(default_factory=list)
    per_instance: list = field(default_factory=list)


def coherence_table(grid, clusterer="infomap", instances: int = 20, seed: int = 0,
                    alpha: float = 0.6, C: float = 2.0, T: float = 0.1) -> list[CoherenceRow]:
    """Mean module coherence under ground-truth angles on fresh random hyperbolic graphs.

    Each instance's modules are scored by their mean coherence and the table
    reports the mean over instances. Nodes without edges are left out of the
    clustering, since no walk-based method can place them.
    """
    fn = CLUSTERERS[clusterer] if isinstance(clusterer, str) else clusterer
    rows = []
    ss = np.random.SeedSequence(seed)
    for N in grid:
        vals, seeds = [], []
        for child in ss.spawn(instances):
            s = int(child.generate_state(1, dtype=np.uint64)[0])
            sample = generate(DiskParams(int(N), alpha, C, T), s)
            keep = np.flatnonzero(sample.graph.degrees > 0)
            idx = -np.ones(sample.graph.n, dtype=np.int64)
            idx[keep] = np.arange(len(keep))
            g = UGraph(len(keep), idx[sample.graph.edges()])
            th = sample.theta[keep]
            p = fn(g, th, s)
            vals.append(coherence(p, th).mean)
            seeds.append(s)
        rows.append(CoherenceRow(int(N), float(np.mean(vals)), instances, seeds, vals))
    return rows


@dataclass
class ResolutionRow:
    name: str
    N: int
    E: int
    detected: int
    predicted: int


def resolution_table(graphs, seed: int = 0, options: OptimizerOptions | None = None) -> list[ResolutionRow]:
    """Detected module count beside the ``E / log2 E`` resolution scale.

    ``graphs`` is a list of ``UGraph`` or ``(name, UGraph)`` pairs.
    """
    rows = []
    for i, item in enumerate(graphs):
        name, g = item if isinstance(item, tuple) else (str(i), item)
        p = optimize(g, seed, options)
        rows.append(ResolutionRow(name, g.n, g.m, p.m, predict_module_count(g.m)))
    return rows


# -- reports ---------------------------------------------------------------


@dataclass
class ExperimentReport:
    name: str
    config: dict
    rows: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add_rows(self, rows) -> None:
        for r in rows:
            self.rows.append(asdict(r) if hasattr(r, "__dataclass_fields__") else dict(r))

    def timed(self, stage: str):
        report = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                report.timings[stage] = time.perf_counter() - self.t

        return _Timer()

    def columns(self) -> list[str]:
        cols: list[str] = []
        for r in self.rows:
            for k, v in r.items():
                if k not in cols and not isinstance(v, (list, dict)):
                    cols.append(k)
        return cols

    def to_json_obj(self, with_timings: bool = True) -> dict:
        out = {"name": self.name, "config": self.config, "rows": self.rows}
        if with_timings:
            out["timings"] = self.timings
        return out

    def write(self, prefix) -> list[str]:
        """Write ``prefix.json``, ``prefix.csv`` and ``prefix.long.csv``.

        Timings are left out so every file is reproducible byte for byte;
        callers that want them read :attr:`timings`.
        """
        from .io import write_json, write_rows_csv

        cols = self.columns()
        paths = [f"{prefix}.json", f"{prefix}.csv", f"{prefix}.long.csv"]
        write_json(paths[0], self.to_json_obj(with_timings=False))
        write_rows_csv(paths[1], cols, [[r.get(c, "") for c in cols] for r in self.rows])
        write_rows_csv(paths[2], ["metric", "x", "y", "seed"], self.long_rows())
        return paths

    def long_rows(self):
        """``(metric, x, y, seed)`` tuples for plotting."""
        out = []
        x_key = next((k for k in ("N", "x", "name") if self.rows and k in self.rows[0]), None)
        for i, r in enumerate(self.rows):
            x = r.get(x_key, i) if x_key else i
            seed = r.get("seed", self.config.get("seed", ""))
            for k, v in r.items():
                if k in (x_key, "seed") or isinstance(v, (list, dict, str)):
                    continue
                out.append((k, x, v, seed))
        return out
