"""Exception types raised by the library."""


class ElasticError(Exception):
    """Base class for all library errors."""


class InvalidInputError(ElasticError, ValueError):
    """Input data or configuration violates a documented precondition."""


class DegenerateDataError(ElasticError):
    """Data carry no usable variability (e.g. all eigenvalues vanish)."""


class DegenerateGeometryError(ElasticError):
    """A manifold operation is undefined for the given points (antipodal inputs)."""
