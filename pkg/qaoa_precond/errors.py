"""Exception hierarchy and process exit codes."""

#------------------------------------------------------------------------
# Exit codes used by the command-line front end
#------------------------------------------------------------------------
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INSUFFICIENT_DATA = 4


class QAOAPrecondError(Exception):
    """Root of every error raised by this package."""

    exit_code = 1


class ConfigError(QAOAPrecondError, ValueError):
    """Invalid configuration, unknown key, missing key or unknown method id."""

    exit_code = EXIT_CONFIG


class ProblemError(QAOAPrecondError, ValueError):
    """A MaxCut instance or assignment violates its invariants."""

    exit_code = EXIT_CONFIG


class ProblemGenerationError(ProblemError):
    """No connected graph was found within the resampling bound."""


class NumericalError(QAOAPrecondError, ArithmeticError):
    """Non-finite objective, failed metric solve or failed Cholesky factorization."""

    exit_code = EXIT_NUMERIC


class MetricInversionError(NumericalError):
    pass


class InsufficientDataError(QAOAPrecondError):
    """Too few runs or observations for the requested statistic."""

    exit_code = EXIT_INSUFFICIENT_DATA


class UpdateSkipped(QAOAPrecondError):
    """
    Raised by a curvature update whose denominator is degenerate.

    The optimizer driver catches it, keeps the previous matrix and counts
    the skip in the run record.
    """

    def __init__(self, method: str, reason: str):
        super().__init__(f"{method} update skipped: {reason}")
        self.method = method
        self.reason = reason
