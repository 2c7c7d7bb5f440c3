"""Exception types shared across the package.

The CLI maps these onto its exit codes: ``ConfigurationError`` and
``DomainError`` are usage problems, ``NumericalFailure`` is a computation that
went wrong, and ``RootNotBracketed`` is a failed control-limit search.
"""


class ParsumError(Exception):
    """Base class for every error raised by parsum."""


class ConfigurationError(ParsumError, ValueError):
    """Inconsistent grids, bad distribution strings, unsupported backends."""


class DomainError(ParsumError, ValueError):
    """An argument outside the region where the quantity is defined."""


class DegenerateConditioningError(DomainError):
    """Conditioning on an event whose probability (or density) vanishes."""


class UnsupportedRegionError(ConfigurationError):
    """A constraint set whose cross-sections are not interval unions."""


class NumericalFailure(ParsumError, ArithmeticError):
    """NaN, overflow, or a result outside its mathematically allowed range."""


class RootNotBracketed(ParsumError, RuntimeError):
    """Bisection could not find a sign change."""


class OracleDegenerateError(ParsumError, RuntimeError):
    """A Monte Carlo oracle accepted no samples."""
