"""Exception types shared across the toolkit."""


class TsslabError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(TsslabError):
    """A parameter is non-finite, non-positive, or otherwise out of domain."""


class NoEquilibriumError(TsslabError):
    """The requested operating point does not exist (arcsin domain violated)."""


class AlgebraicSolveError(TsslabError):
    """The terminal-voltage fixed point failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CapacityError(TsslabError):
    """Requested injection exceeds the converter current limit."""


class ConfigError(TsslabError):
    """A run configuration failed to parse or validate."""
