"""
Exception hierarchy shared by the solver and the CLI.
"""

from typing import List, Optional


class FloquetWellError(Exception):
    """Base class for every error raised by floquet_well."""


class ConfigError(FloquetWellError, ValueError):
    """Invalid run configuration."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class DomainError(FloquetWellError, ValueError):
    """Argument outside the domain of a special function or kernel."""


class RangeError(FloquetWellError, OverflowError):
    """A special function result is not representable."""


class ThresholdError(FloquetWellError):
    """Channel energy sits exactly on a threshold."""


class StepSizeError(FloquetWellError):
    """Nearest-root tracking cannot tell the two branches apart."""


class AliasingError(FloquetWellError):
    """Time sampling is too coarse for the retained harmonics."""


class RegularizationError(FloquetWellError):
    """The interior matching block is numerically singular."""


class SolverError(FloquetWellError):
    """A root search did not converge."""

    def __init__(self, message: str, trace: Optional[List] = None):
        super().__init__(message)
        self.trace = trace or []


class TruncationLimitedError(SolverError):
    """The smallest singular value plateaus above tolerance."""


class ContinuationStuckError(FloquetWellError):
    """Continuation step fell below the minimum step."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
