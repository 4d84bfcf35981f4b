"""Exception hierarchy shared by every misslab module."""


class MisslabError(Exception):
    """Base class for all errors raised by misslab."""


class FitError(MisslabError):
    """A model fit could not produce a usable estimate."""


class SeparationError(FitError):
    """Logistic coefficients diverge (complete or quasi-complete separation)."""


class DegenerateError(FitError):
    """The response carries no information (constant, or too few rows)."""


class SingularError(FitError):
    """The weighted information / normal-equations matrix is singular."""


class NonConvergenceError(FitError):
    """An iterative fit hit its iteration cap.

    ``trace`` holds whatever diagnostic sequence the caller collected.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


class InsufficientDataError(FitError):
    """Too few usable rows for the requested fit."""


class ImputationModelError(FitError):
    """A chained-equations step failed even after the ridge fallback."""


class BootstrapFailureError(MisslabError):
    """Too many bootstrap refits failed."""

    def __init__(self, message, successes=0, requested=0):
        super().__init__(message)
        self.successes = successes
        self.requested = requested


class DimensionError(MisslabError):
    """Inputs have mismatched dimensions."""


class InsufficientTrialsError(MisslabError):
    """A method succeeded in fewer than half of the Monte Carlo trials."""


class ParseError(MisslabError):
    """A CSV cell could not be parsed under the declared schema."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(MisslabError):
    """CSV header or schema declaration is inconsistent."""


class ConfigError(MisslabError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class UnknownMethodError(ConfigError):
    """A method name outside the supported set was requested."""
