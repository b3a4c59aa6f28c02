"""Exception types raised across the pipeline.

Every error the public API raises deliberately derives from EyefitError so
callers (CLI, service) can map failures to exit codes / HTTP statuses without
pattern-matching on messages.
"""


class EyefitError(Exception):
    """Base class for all eyefit errors."""


class InvalidArgumentError(EyefitError, ValueError):
    """An argument violates an operation's contract (shape, finiteness, range)."""


class DegenerateInputError(EyefitError, ValueError):
    """Geometrically degenerate input: collinear point sets, zero-area fans, coincident anchors."""


class InvalidAssetError(EyefitError):
    """An asset parses but violates its schema (missing groups, bad units, bad anchors)."""


class CorruptAssetError(InvalidAssetError):
    """An asset container is structurally broken (blob shorter than the manifest declares)."""


class InsufficientDataError(EyefitError):
    """Too few usable observations to attempt a fit."""


class NumericalFailureError(EyefitError):
    """The optimizer produced a non-finite cost or Jacobian."""


class CannotFitError(EyefitError):
    """Clearance resolution exhausted its step budget without finding a valid pose."""


class ObjParseError(EyefitError):
    """Malformed OBJ input; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UnsupportedFeatureError(EyefitError):
    """Input uses a feature outside the supported subset (negative OBJ indices, exotic accessors)."""


class NotGlbError(EyefitError):
    """The byte stream is not a GLB container at all (bad magic)."""


class CorruptGlbError(EyefitError):
    """The byte stream claims to be GLB but its chunk structure is inconsistent."""


class IngestError(EyefitError):
    """Catalog ingest failed as a whole (duplicate ids, unreadable directory)."""


class DetectorError(EyefitError):
    """The external landmark detector failed or returned a malformed response."""
