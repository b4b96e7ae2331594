"""Exception types shared across the toolkit.

Every error raised on purpose by cropflow derives from CropflowError so
callers (and the CLI) can separate data problems from genuine bugs.
"""

from __future__ import annotations


class CropflowError(Exception):
    """Base class for all toolkit errors."""


class InvalidBox(CropflowError):
    """A crop box or rectangle violates its geometric constraints."""


class DimsMismatch(CropflowError):
    """Two inputs that must share dimensions or length do not."""


class MissingFrame(DimsMismatch):
    """A numbered frame source has a gap in its index sequence."""


class PyramidError(CropflowError):
    """A frame is too small for the requested pyramid depth."""


class InsufficientData(CropflowError):
    """An operation needs more samples than were provided."""


class EmptyTrack(CropflowError):
    """An annotation track without annotations was given where one is required."""


class ParseError(CropflowError):
    """A file could not be decoded.

    ``offset`` carries the byte position of the problem when it is known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(CropflowError):
    """A structured file or payload is schema-invalid.

    The message names the offending field path; invalid input is rejected,
    never repaired.
    """


class LccUndefined(CropflowError):
    """Correlation is undefined because one of the maps has zero variance."""


class SimUndefined(CropflowError):
    """A normalized map comparison is undefined because a map has no mass."""


class SessionError(CropflowError):
    """Base class for annotation-session protocol errors."""


class SessionDone(SessionError):
    """The session has no remaining items."""


class NothingToAccept(SessionError):
    """Accept was requested before any attempt was submitted."""


class EmptyExport(SessionError):
    """An export matched no accepted annotations."""


class NotFound(CropflowError):
    """A referenced session, video, or frame does not exist."""
