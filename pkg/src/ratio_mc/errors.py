"""Exception types shared across the package."""


class RatioMcError(Exception):
    """Base class for every error raised by this package."""


class UnsupportedDensity(RatioMcError):
    """The distribution can be sampled but does not expose an exact log-pdf."""


class DegenerateData(RatioMcError):
    """A covariance matrix is not symmetric positive definite."""


class ParseError(RatioMcError):
    """A persisted file is malformed.  Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionMismatch(RatioMcError):
    """Point dimensions disagree with what the operation expects."""


class TooFewSamples(RatioMcError):
    """Not enough samples per class to perform the requested split."""


class NonFiniteLoss(RatioMcError):
    """Training loss became NaN or infinite; the run was aborted."""


class InvalidC(RatioMcError):
    """Envelope constant must exceed 1 for the mixture decomposition."""


class AllZeroWeights(RatioMcError):
    """Importance weights contain no positive entry."""


class ConfigError(RatioMcError):
    """Run configuration is missing, malformed or inconsistent."""
