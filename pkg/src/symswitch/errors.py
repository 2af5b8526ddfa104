"""Exception hierarchy shared by all symswitch modules."""


class SymswitchError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(SymswitchError, ValueError):
    """Inconsistent or out-of-domain configuration."""


class SpaceMismatchError(SymswitchError, ValueError):
    """Operators from different Hilbert spaces were combined."""


class ConventionMismatchError(SymswitchError, ValueError):
    """Superoperators built with different vectorization conventions were combined."""


class DenseLimitError(SymswitchError):
    """A dense superoperator would exceed the configured size limit."""


class EigensolverError(SymswitchError):
    """The spectral solver did not converge or its result failed validation."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConsistencyError(SymswitchError):
    """A structural invariant of the Lindblad generator was violated."""


class SymmetryError(SymswitchError):
    """Sector decomposition requested for a model that is not strongly symmetric."""

    def __init__(self, message, norms=None):
        super().__init__(message)
        self.norms = norms or {}
