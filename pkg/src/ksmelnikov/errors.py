"""Exception types shared across the toolkit."""


class KsmError(Exception):
    """Base class for all toolkit errors."""


class NonFiniteError(KsmError):
    """A state vector left the finite range (blow-up or wrong integration direction)."""


class NoConvergenceError(KsmError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SingularJacobianError(KsmError):
    """The Newton linear solve hit a (numerically) singular Jacobian."""


class UnstableSubspaceEmptyError(KsmError):
    """Shooting requested from an equilibrium with no unstable directions."""


class OutOfRangeError(KsmError):
    """Interpolation requested outside the sampled time range."""


class DegeneratePairingError(KsmError):
    """Adjoint/tangent pairing too small to normalize against."""


class SectionMissError(KsmError):
    """A manifold trace never crossed the Poincare section."""


class DegenerateGridError(KsmError):
    """A parameter grid without enough distinct values for a fit."""


class ConfigError(KsmError):
    """Base class for configuration problems (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ValidationError(ConfigError):
    def __init__(self, field, constraint):
        super().__init__(f"{field}: {constraint}")
        self.field = field
        self.constraint = constraint


class CacheFormatError(KsmError):
    """Base class for orbit-cache file problems."""


class VersionMismatchError(CacheFormatError):
    pass


class ChecksumMismatchError(CacheFormatError):
    pass
