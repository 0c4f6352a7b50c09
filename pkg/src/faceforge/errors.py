"""Exception types shared across the toolkit."""


class FaceForgeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(FaceForgeError, ValueError):
    """An input violates a documented precondition or invariant."""


class DimensionError(FaceForgeError, ValueError):
    """Shapes or resolutions of two operands do not match."""


class ConvergenceError(FaceForgeError, RuntimeError):
    """An optimization-based routine failed to converge.

    Carries the final residual so callers can decide whether the
    partial answer is usable.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.6g})")
        self.residual = residual


class NonFiniteLossError(FaceForgeError, RuntimeError):
    """The attack objective became NaN/inf; carries the loss trace so far."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


class DatasetError(FaceForgeError, ValueError):
    """Dataset ingestion or manifest loading failed."""


class ReportError(FaceForgeError, ValueError):
    """Report generation cannot proceed (e.g. nothing to report)."""


class RemoteError(FaceForgeError, RuntimeError):
    """Base class for remote verification client failures."""


class CredentialsError(RemoteError):
    """Required credentials are missing from the environment."""


class AuthenticationError(RemoteError):
    """The provider rejected the configured credentials."""


class RetryExhaustedError(RemoteError):
    """Transient failures persisted beyond the retry policy."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (attempts={attempts})")
        self.attempts = attempts


class MalformedResponseError(RemoteError):
    """The provider returned an unparseable or out-of-range response."""

    def __init__(self, message: str, raw_body: str):
        super().__init__(f"{message}; raw body: {raw_body[:500]}")
        self.raw_body = raw_body
