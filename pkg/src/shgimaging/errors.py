"""Exception hierarchy shared across the package.

All errors derive from :class:`ShgError` so callers can catch the package's
failures with one except clause.  The CLI maps the subclasses to distinct
exit codes (configuration / compute / io).
"""


class ShgError(Exception):
    """Base class for all package errors."""


class DomainError(ShgError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class SingularityError(ShgError, ValueError):
    """Evaluation requested at (or too close to) a singular point."""


class ResolutionError(ShgError, ValueError):
    """A grid is too coarse to resolve the requested length scale."""


class ConfigError(ShgError, ValueError):
    """Inconsistent or invalid configuration of a simulation scenario."""


class FormatError(ShgError, ValueError):
    """A data file does not match the expected schema."""


class NoPeakError(ShgError, ValueError):
    """Peak localization requested on an image with no usable peak."""


class IoError(ShgError, OSError):
    """Failure to read or write an output artifact."""
