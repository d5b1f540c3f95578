"""Hyperbolic embedding of single-layer and multiplex networks with map-equation communities."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    DataError,
    DegenerateSet,
    HypermuxError,
    NoComparablePairs,
    NumericFailure,
    OverlappingSets,
    PoolExhausted,
    PowerIterationError,
    RadialSingularity,
    UndefinedCorrelation,
)
from .geometry import DiskParams, PolarPoint, connection_probability, hyperbolic_distance  # noqa: F401
from .graph import UGraph  # noqa: F401
