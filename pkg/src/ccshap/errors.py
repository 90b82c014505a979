"""Exception types shared across the package."""


class CcshapError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(CcshapError, ValueError):
    """An array argument has the wrong shape; nothing is ever broadcast silently."""


class NumericError(CcshapError, ArithmeticError):
    """A computation produced a non-finite value."""


class ConstructionError(CcshapError, RuntimeError):
    """A synthetic world could not be built (rank deficiency after re-draws)."""


class TrainingError(CcshapError, RuntimeError):
    """Training diverged (non-finite loss)."""


class ProtocolError(CcshapError, RuntimeError):
    """A wire message violated the oracle protocol framing or schema."""


class RemoteOracleError(CcshapError, RuntimeError):
    """The external oracle reported a failure for a request."""
