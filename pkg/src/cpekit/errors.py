"""Exception hierarchy shared by every module.

Validation problems derive from :class:`ValueError` so callers can catch
them the usual way. Numerical failures derive from :class:`ComputationError`.
"""


class CpeKitError(Exception):
    """Base class for all errors raised by the package."""


class InputError(CpeKitError, ValueError):
    """Malformed or inconsistent input data."""


class DimensionError(InputError):
    """Array shapes do not agree."""


class InsufficientLengthError(InputError):
    """A trajectory is too short for the requested Hankel depth."""


class ParseError(InputError):
    """A CSV or JSON artifact could not be parsed."""


class BoundViolationError(InputError):
    """Requested signal lengths violate the minimal-length inequality."""


class UnsupportedCaseError(InputError):
    """The request is well formed but outside the supported construction."""


class ComputationError(CpeKitError):
    """A numerical procedure failed to produce a usable answer."""


class ContractViolationError(ComputationError):
    """A user-supplied callable broke its documented contract."""


class InfeasibleProblemError(ComputationError):
    """Constraints admit no solution."""


class DegenerateProblemError(ComputationError):
    """The problem is ill posed, e.g. unbounded or singular."""


class BoundHandlingError(ComputationError):
    """The active-set loop for box bounds did not settle."""


class RepresentationError(ComputationError):
    """A trajectory could not be expressed through the data basis."""
