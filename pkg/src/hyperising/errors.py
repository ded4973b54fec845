"""Exception types raised by hyperising."""


class HyperisingError(Exception):
    """Base class for all package errors."""


class HypergraphFormatError(HyperisingError, ValueError):
    """Malformed hypergraph input (bad edge, duplicate vertex set, parse failure)."""


class DimensionMismatch(HyperisingError, ValueError):
    pass


class IllConditioned(HyperisingError, ValueError):
    """The empirical covariance of the features is numerically singular."""


class TooLarge(HyperisingError, ValueError):
    """The instance exceeds the exact-enumeration cap."""


class OutOfBox(HyperisingError, ValueError):
    """Parameters lie outside the feasible box."""


class NoTopEdges(HyperisingError, ValueError):
    """The hypergraph has no edge of maximum cardinality."""


class NonFinite(HyperisingError, FloatingPointError):
    """An optimizer iterate produced a non-finite gradient."""


class GenerationFailed(HyperisingError, RuntimeError):
    """A synthetic instance could not be produced within the retry budget."""
