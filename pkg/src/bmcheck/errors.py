"""Exception types shared across the toolkit.

Every error raised deliberately by bmcheck derives from BmcheckError so
callers (and the CLI exit-code mapping) can distinguish toolkit failures
from programming errors.
"""


class BmcheckError(Exception):
    """Base class for all toolkit errors."""


class NotPositiveDefinite(BmcheckError):
    """A matrix required to be positive definite has a pivot at or below tolerance."""


class DimensionMismatch(BmcheckError):
    """Operand dimensions are incompatible."""


class SingularCovariance(BmcheckError):
    """Covariance determinant below tolerance where an inverse is required."""


class NotDifferentiableHere(BmcheckError):
    """Derivative requested at a point where the transform has none."""


class WindowNotOnGrid(BmcheckError):
    """A requested time window endpoint does not coincide with a grid point."""


class DegenerateSample(BmcheckError):
    """Sample covariance numerically singular; the fit cannot proceed."""


class DegenerateDesign(BmcheckError):
    """Regression design matrix is rank-deficient."""


class DisconnectedMask(BmcheckError):
    """Masked grid point set is not connected under axis-neighbor adjacency."""


class HaloOutsideEvaluationDomain(BmcheckError):
    """A finite-difference stencil needs a point outside the field's domain."""


class ConfigInvalid(BmcheckError):
    """Scenario configuration failed validation; message names the field."""


class UnsupportedFormat(BmcheckError):
    """Requested serialization format is not one of the supported set."""
