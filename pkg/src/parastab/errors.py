"""Exception types shared across the package."""


class ParastabError(Exception):
    """Base class for all package-specific errors."""


class EmptyRegion(ParastabError):
    """A region with no cells was passed where a nonempty one is required."""


class NonFinite(ParastabError):
    """A field or coefficient evaluation produced NaN or Inf."""


class BlowUp(ParastabError):
    """The solution sup-norm exceeded the runaway guard during time stepping."""


class DimMismatch(ParastabError):
    """Two objects live on incompatible grids or dimensions."""


class BadP(ParastabError):
    """An L^p exponent outside [1, inf] was requested."""


class EmptyList(ParastabError):
    """An aggregation was requested over an empty collection."""


class ZeroDenominator(ParastabError):
    """A ratio was requested whose denominator vanishes while the numerator does not."""


class HypothesisViolation(ParastabError):
    """A problem failed its coefficient hypothesis self-tests (ellipticity or
    derivative consistency)."""


class ParseError(ParastabError):
    """A scenario configuration file failed to parse or validate."""


class UnknownCatalogId(ParseError):
    """A configuration referenced a problem family that is not in the catalog."""


class RangeError(ParseError):
    """A numeric configuration value is outside its documented range."""
