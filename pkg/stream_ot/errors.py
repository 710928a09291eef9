"""
Errors
======

Exception hierarchy shared by the library and the command line.
Library code raises these; only the CLI layer turns them into exit codes.
"""

from typing import Optional


class StreamOTError(Exception):
    """Base class for every error raised by stream_ot."""


class ConfigurationError(StreamOTError, ValueError):
    """Invalid configuration value (cost kind, compression method, budget...)."""


class ScheduleError(ConfigurationError):
    """A schedule parameter violates one of the convergence assumptions."""


class RepresentationEmptyError(StreamOTError, ValueError):
    """A potential or measure was built or evaluated without any atom."""


class AlignmentError(StreamOTError, ValueError):
    """Two arrays that must share a length do not."""


class RepresentationCorruptionError(StreamOTError):
    """A potential-derived measure carries a weight above one."""


class ScalingError(StreamOTError):
    """A moment system cannot be scaled without underflow."""


class InsufficientDataError(StreamOTError, ValueError):
    """Not enough trace rows or compression events for a fit."""


class TraceIOError(StreamOTError, OSError):
    """Reading or writing a trace/plot file failed."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path is not None:
            message = f"{message} (path: {path})"
        super().__init__(message)
