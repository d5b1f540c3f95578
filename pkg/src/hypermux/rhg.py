"""Random hyperbolic disk sampler and numeric checks of its basic lemmas.

Randomness comes from numpy's PCG64 bit generator seeded with a 64-bit
integer. Streams are consumed in a fixed order so that ``(params, seed)``
reproduces a sample bit for bit:

1. ``n`` uniforms for the radii (inverse CDF), in node order;
2. ``n`` uniforms for the angles, in node order;
3. one uniform per node pair in lexicographic order ``(0,1), (0,2), ...``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import TWO_PI, DiskParams, PolarPoint, connection_probability, distance_array
from .graph import UGraph


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def radial_cdf(r, params: DiskParams):
    a, R = params.alpha, params.R
    return (np.cosh(a * np.asarray(r, dtype=float)) - 1.0) / (math.cosh(a * R) - 1.0)


def radius_from_uniform(u, params: DiskParams):
    """Inverse radial CDF."""
    a, R = params.alpha, params.R
    return np.arccosh(1.0 + np.asarray(u, dtype=float) * (math.cosh(a * R) - 1.0)) / a


def sample_radius(params: DiskParams, rng: np.random.Generator, size=None):
    """Draw radii with density ``alpha sinh(alpha r) / (cosh(alpha R) - 1)``."""
    r = radius_from_uniform(rng.random(size), params)
    return float(r) if size is None else np.minimum(r, params.R)


@dataclass
class RhgSample:
    params: DiskParams
    r: np.ndarray
    theta: np.ndarray
    graph: UGraph
    seed: int

    @property
    def coords(self) -> list[PolarPoint]:
        return [PolarPoint(float(a), float(b)) for a, b in zip(self.r, self.theta)]


def sample_edges(r, theta, params: DiskParams, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli edge draws for every pair, consumed in lexicographic order."""
    n = len(r)
    chunks = []
    for i in range(n - 1):
        d = distance_array(r[i], theta[i], r[i + 1:], theta[i + 1:])
        p = connection_probability(d, params)
        hit = np.flatnonzero(rng.random(n - i - 1) < p)
        if len(hit):
            chunks.append(np.column_stack([np.full(len(hit), i), hit + i + 1]))
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(chunks).astype(np.int64)


def generate(params: DiskParams, seed: int) -> RhgSample:
    if params.n < 2:
        raise ValueError("need at least two nodes")
    rng = make_rng(seed)
    r = sample_radius(params, rng, params.n)
    theta = rng.random(params.n) * TWO_PI
    edges = sample_edges(r, theta, params, rng)
    return RhgSample(params, r, theta, UGraph(params.n, edges), int(seed))


def ball_measure_check(params: DiskParams, r: float, sample_size: int, seed: int = 0):
    """Empirical mass of the centred ball of radius ``r`` vs ``exp(-alpha (R - r))``."""
    if not 0.0 <= r <= params.R:
        raise ValueError("radius outside the disk")
    radii = sample_radius(params, make_rng(seed), sample_size)
    empirical = float(np.mean(radii <= r)) if r > 0 else 0.0
    return empirical, math.exp(-params.alpha * (params.R - r))


def ppp_sector_check(params: DiskParams, r_max: float, dtheta: float, trials: int, seed: int = 0):
    """Chance that the region ``{r < r_max, 0 <= theta < dtheta}`` is occupied.

    Returns ``(empirical, 1 - exp(-n mu(S)))`` where ``mu`` is the exact
    probability mass of the region. Only node coordinates are drawn.
    """
    mu = float(radial_cdf(r_max, params)) * dtheta / TWO_PI
    rng = make_rng(seed)
    hits = 0
    for _ in range(trials):
        r = sample_radius(params, rng, params.n)
        th = rng.random(params.n) * TWO_PI
        hits += bool(np.any((r < r_max) & (th < dtheta)))
    return hits / trials, 1.0 - math.exp(-params.n * mu)


@dataclass
class CoreSectorResult:
    all_sectors: float
    per_sector: float
    lemma: float
    poisson_all: float


def core_sector_check(params: DiskParams, K: int, trials: int, seed: int = 0) -> CoreSectorResult:
    """How often every one of ``K`` equal sectors holds a core node (``r < R/2``).

    Alongside the empirical all-sector frequency this reports the average
    per-sector occupancy, the closed form ``1 - exp(-n^(1-alpha) / K)`` and
    the Poisson prediction ``(1 - exp(-lambda))^K`` with the exact core mass.
    """
    if K < 1:
        raise ValueError("need at least one sector")
    rng = make_rng(seed)
    full = 0
    occupied = 0
    for _ in range(trials):
        r = sample_radius(params, rng, params.n)
        th = rng.random(params.n) * TWO_PI
        core = th[r < params.R / 2]
        sectors = np.unique(np.minimum((core / TWO_PI * K).astype(np.int64), K - 1))
        occupied += len(sectors)
        full += len(sectors) == K
    lam = params.n * float(radial_cdf(params.R / 2, params)) / K
    return CoreSectorResult(
        all_sectors=full / trials,
        per_sector=occupied / (trials * K),
        lemma=1.0 - math.exp(-params.n ** (1.0 - params.alpha) / K),
        poisson_all=(1.0 - math.exp(-lam)) ** K,
    )


def fit_power_law_exponent(degrees, kmin: int | None = None) -> tuple[float, int]:
    """Discrete power-law MLE for the degree exponent.

    Uses the standard ``1 + n / sum(log(k / (kmin - 1/2)))`` estimator. When
    ``kmin`` is not given it is chosen to minimise the Kolmogorov-Smirnov
    distance between the tail and the fitted law. Returns ``(beta, kmin)``.
    """
    k = np.asarray(degrees, dtype=float)
    k = k[k > 0]
    if len(k) < 2:
        raise ValueError("not enough positive degrees")

    def mle(kmin):
        tail = k[k >= kmin]
        return 1.0 + len(tail) / np.sum(np.log(tail / (kmin - 0.5))), tail

    if kmin is not None:
        return float(mle(kmin)[0]), int(kmin)
    best = (math.inf, None, None)
    for cand in np.unique(k):
        tail_size = np.count_nonzero(k >= cand)
        if tail_size < 50:
            break
        beta, tail = mle(cand)
        xs = np.sort(tail)
        support = np.unique(xs)
        emp = np.searchsorted(xs, support, side="right") / len(xs)
        # P(K <= x) under the continuity-corrected law
        model = 1.0 - ((support + 0.5) / (cand - 0.5)) ** (1.0 - beta)
        ks = float(np.max(np.abs(emp - model)))
        if ks < best[0]:
            best = (ks, beta, int(cand))
    if best[1] is None:
        beta, _ = mle(k.min())
        return float(beta), int(k.min())
    return float(best[1]), best[2]
