"""Exception and warning types shared across the package."""


class BiphotonError(Exception):
    """Base class for all errors raised by biphoton."""


class ConfigError(BiphotonError, ValueError):
    """Invalid configuration value or missing configuration key.

    ``key`` and ``line`` are filled in when the error can be traced back
    to a config file entry.
    """

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line

    def __str__(self):
        msg = super().__str__()
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.key is not None:
            where.append(f"key '{self.key}'")
        return f"{msg} ({', '.join(where)})" if where else msg


class InputDomainError(BiphotonError, ValueError):
    """Non-finite or otherwise out-of-domain numeric input."""


class ResolutionError(BiphotonError, ValueError):
    """A numeric grid is too coarse or too small for the requested transform."""


class ModelingError(BiphotonError):
    """Structurally invalid model, e.g. a detector without partner positions."""


class DataError(BiphotonError, ValueError):
    """Malformed data: negative rates, unsorted or corrupt tag streams."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class DegenerateFitError(BiphotonError):
    """Normal equations are singular or too ill-conditioned to solve."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class PumpCoherenceWarning(RuntimeWarning):
    """Biphoton path-length difference is not small against the pump coherence length."""


class UnreliableFitWarning(RuntimeWarning):
    """A quantity was derived from a fit that did not converge."""


class CoverageWarning(RuntimeWarning):
    """A delay grid spans fewer coherence lengths than recommended."""
