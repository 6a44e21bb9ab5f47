"""Exception types shared across the package."""


class WelfareError(Exception):
    """Base class for all package errors."""


class DomainError(WelfareError, ValueError):
    """An argument lies outside the support of a distribution."""


class ParameterError(WelfareError, ValueError):
    """Invalid parameters or inconsistent inputs."""


class NumericError(WelfareError, ArithmeticError):
    """A numerical routine failed to converge or became ill-conditioned."""


class IngestionError(WelfareError, ValueError):
    """Malformed input data."""


class LatentClampWarning(RuntimeWarning):
    """A CDF value was so close to 0 or 1 that its normal score was clamped."""
