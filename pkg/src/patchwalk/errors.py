"""Exception hierarchy shared across the package.

Every error raised by patchwalk derives from :class:`PatchwalkError`, so
callers embedding the library can catch one base class.  Numeric failures
(convergence, degeneracy) and input contract violations get distinct types
because the CLI maps them to different exit codes.
"""


class PatchwalkError(Exception):
    """Base class for all patchwalk errors."""


# --- geometry -------------------------------------------------------------

class NotPositiveDefinite(PatchwalkError):
    """Covariance matrix is not positive definite at working precision."""


class DegenerateLevel(PatchwalkError):
    """Variance level is non-positive or not attainable on the budget hyperplane."""


class OffSimplexAffineHull(PatchwalkError):
    """Input weights do not sum to one within tolerance."""


# --- topology ---------------------------------------------------------------

class DegenerateSimplex(PatchwalkError):
    """Half-space system does not describe a non-degenerate simplex."""


class EmptyIntersection(PatchwalkError):
    """The sphere-simplex intersection (or a required sub-body) is empty."""


class NumericallyOnBoundary(PatchwalkError):
    """Query point is within tolerance of the simplex boundary; caller decides."""


class NoCrossing(PatchwalkError):
    """A segment expected to cross the unit sphere does not."""


# --- random walks -----------------------------------------------------------

class AnchorOutsideSimplex(PatchwalkError):
    """Walk anchor point violates the simplex constraints."""


class TangentFacet(PatchwalkError):
    """Facet normal is parallel to the sphere normal; no reflection direction."""


class VolumesNotCached(PatchwalkError):
    """Patch-level sampling requires component weights to be cached first."""


# --- volume annealing --------------------------------------------------------

class DegenerateMean(PatchwalkError):
    """Sample centroid has near-zero norm; no usable mean direction."""


class ScheduleStall(PatchwalkError):
    """No positive schedule exponent satisfies the variance window."""


class NonConvergence(PatchwalkError):
    """An estimator hit its sample cap before meeting its convergence criterion."""


# --- diagnostics --------------------------------------------------------------

class ZeroVariance(PatchwalkError):
    """A chain coordinate is constant; the scale-reduction factor is undefined."""


# --- pipeline -------------------------------------------------------------------

class MalformedCsv(PatchwalkError):
    """Input CSV cannot be parsed into a returns panel."""


class NonMonotoneDates(PatchwalkError):
    """Panel dates are not strictly increasing."""


class TooFewObservations(PatchwalkError):
    """Estimation window is too short for covariance estimation."""


class TooFewAssets(PatchwalkError):
    """Fewer assets than variance buckets."""


class CoverageGap(PatchwalkError):
    """Return data missing inside a holding window."""


class TooShortSeries(PatchwalkError):
    """Return series too short for the requested statistic."""


class DegenerateVariance(PatchwalkError):
    """A return series has (near) zero variance; test statistic undefined."""
