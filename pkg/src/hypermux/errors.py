"""Exception hierarchy shared by all hypermux modules."""


class HypermuxError(Exception):
    """Base class for all library errors."""


class DataError(HypermuxError):
    """Malformed or unusable input data."""


class NumericFailure(HypermuxError):
    """A numerical routine failed to converge or produced an invalid value."""


class RadialSingularity(NumericFailure):
    """Angular metric rescale requested too close to the disk origin."""


class OverlappingSets(HypermuxError):
    """Two node sets that must be disjoint share members."""


class DegenerateSet(HypermuxError):
    """A node set (or its complement) has zero volume."""


class NoComparablePairs(HypermuxError):
    """A pairwise statistic has nothing to compare."""


class UndefinedCorrelation(NumericFailure):
    """Correlation requested for a constant vector."""


class PowerIterationError(NumericFailure):
    """Stationary distribution did not converge."""

    def __init__(self, residual, iterations):
        super().__init__(
            f"power iteration did not converge: residual {residual:.3e} "
            f"after {iterations} iterations"
        )
        self.residual = residual
        self.iterations = iterations


class PoolExhausted(DataError):
    """Not enough non-edges to sample negatives from."""
