"""Hyperbolic kernels on the polar Poincare disk.

Points are ``(r, theta)`` with ``r`` the hyperbolic distance from the disk
centre. Distances follow the hyperbolic law of cosines; everything here is a
pure function of its arguments.

All scalar kernels have a vectorised twin operating on numpy arrays. The
scalar versions are used inside the SGD inner loop, where the per-call numpy
overhead would dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import RadialSingularity

TWO_PI = 2.0 * math.pi
# Below this radius the angular rescale 1/sinh^2(r) is treated as singular.
SINGULAR_RADIUS = 1e-9


def wrap_angle(theta):
    """Map an angle (or array of angles) into ``[0, 2*pi)``."""
    if isinstance(theta, np.ndarray):
        out = np.mod(theta, TWO_PI)
        out[out >= TWO_PI] = 0.0
        return out
    out = math.fmod(theta, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    if out >= TWO_PI:
        out = 0.0
    return out


def angular_difference(a, b):
    """Circular distance between two angles, in ``[0, pi]``."""
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b) + math.pi, TWO_PI) - math.pi)
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float

    def __post_init__(self):
        if not self.r >= 0.0:
            raise ValueError(f"radial coordinate must be >= 0, got {self.r}")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))


@dataclass(frozen=True)
class DiskParams:
    """Parameters of the random hyperbolic disk.

    The disk radius is ``R = 2 ln(n) + C``; the degree power-law exponent of
    graphs drawn with these parameters is ``2 * alpha + 1``.
    """

    n: int
    alpha: float
    C: float = 0.0
    T: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not self.alpha > 0.5:
            raise ValueError(f"alpha must exceed 1/2, got {self.alpha}")
        if not 0.0 < self.T < 1.0:
            raise ValueError(f"temperature must lie in (0, 1), got {self.T}")
        if not self.R > 0.0:
            raise ValueError(f"disk radius 2 ln n + C must be positive, got {self.R}")

    @property
    def R(self) -> float:
        return 2.0 * math.log(self.n) + self.C

    @property
    def beta(self) -> float:
        return 2.0 * self.alpha + 1.0


def _cosh_gap(ru, rv, dtheta):
    # D - 1 written without cancellation:
    # cosh(ru - rv) - 1 + sinh ru sinh rv (1 - cos dtheta)
    s = math.sinh(0.5 * (ru - rv))
    h = math.sin(0.5 * dtheta)
    return 2.0 * s * s + 2.0 * math.sinh(ru) * math.sinh(rv) * h * h


def hyperbolic_distance(u: PolarPoint, v: PolarPoint) -> float:
    return distance(u.r, u.theta, v.r, v.theta)


def distance(ru: float, tu: float, rv: float, tv: float) -> float:
    """Scalar hyperbolic distance between ``(ru, tu)`` and ``(rv, tv)``."""
    a = _cosh_gap(ru, rv, tu - tv)
    if a <= 0.0:
        return 0.0
    # arcosh(1 + a), stable for small a
    return math.log1p(a + math.sqrt(a * (a + 2.0)))


def distance_array(ru, tu, rv, tv):
    """Vectorised :func:`distance`; arguments broadcast against each other."""
    ru, tu, rv, tv = (np.asarray(x, dtype=float) for x in (ru, tu, rv, tv))
    s = np.sinh(0.5 * (ru - rv))
    h = np.sin(0.5 * (tu - tv))
    a = 2.0 * s * s + 2.0 * np.sinh(ru) * np.sinh(rv) * h * h
    a = np.maximum(a, 0.0)
    return np.log1p(a + np.sqrt(a * (a + 2.0)))


def pairwise_distances(r, theta):
    """Condensed vector of all ``n(n-1)/2`` pairwise distances (i < j order)."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    iu, ju = np.triu_indices(len(r), k=1)
    return distance_array(r[iu], theta[iu], r[ju], theta[ju])


def connection_probability(d, params: DiskParams | None = None, *, R=None, T=None):
    """Fermi-Dirac link probability ``1 / (1 + exp((d - R) / 2T))``.

    Accepts scalars or arrays. Saturates to exactly 0 or 1 instead of
    overflowing.
    """
    if params is not None:
        R, T = params.R, params.T
    if isinstance(d, np.ndarray):
        return expit((R - d) / (2.0 * T))
    z = (R - d) / (2.0 * T)
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def distance_partials_raw(ru: float, tu: float, rv: float, tv: float):
    """``(dd/dru, dd/dtu)`` for scalar coordinates; ``(0, 0)`` at coincidence."""
    dtheta = tu - tv
    a = _cosh_gap(ru, rv, dtheta)
    if a <= 0.0:
        return 0.0, 0.0
    root = math.sqrt(a * (a + 2.0))  # sqrt(D^2 - 1)
    h = math.sin(0.5 * dtheta)
    dr = math.sinh(ru - rv) + 2.0 * math.cosh(ru) * math.sinh(rv) * h * h
    dt = math.sinh(ru) * math.sinh(rv) * math.sin(dtheta)
    return dr / root, dt / root


def distance_partials(u: PolarPoint, v: PolarPoint):
    """Partial derivatives of ``d(u, v)`` with respect to ``u``'s coordinates."""
    return distance_partials_raw(u.r, u.theta, v.r, v.theta)


def metric_tensor_inverse_diag(p: PolarPoint | float):
    """Diagonal of the inverse metric ``diag(1, sinh(r)^-2)`` at ``p``."""
    r = p.r if isinstance(p, PolarPoint) else float(p)
    if r < SINGULAR_RADIUS:
        raise RadialSingularity(f"angular rescale diverges at r={r:g}")
    s = math.sinh(r)
    return 1.0, 1.0 / (s * s)
