"""Exception types shared across the engine."""


class CourtTrackError(Exception):
    """Base class for all engine errors."""


class DegenerateProjection(CourtTrackError):
    """Homogeneous projection whose third coordinate vanishes."""


class EmptyOverlap(CourtTrackError):
    """Patch comparison with no offset valid in both frames."""


class EmptyRegion(CourtTrackError):
    """Mask region predicate selects no pixel inside the frame."""


class NoSegments(CourtTrackError):
    """Line voting invoked with an empty segment list."""


class NoCandidates(CourtTrackError):
    """Boundary selection with no candidate of the requested axis."""


class DegenerateCourt(CourtTrackError):
    """Court boundary search collapsed without a usable region."""


class DetectorFailure(CourtTrackError):
    """Raised by detector adapters; propagated unchanged by the passes."""


class EmptyKeypoints(CourtTrackError):
    """Skeleton box requested for an empty keypoint list."""


class InconsistentFrameIndexing(CourtTrackError):
    """Tracker input frames not indexed consecutively from 0."""


class EmptyGroundTruth(CourtTrackError):
    """Tracking evaluation requires at least one ground-truth box."""


class TargetOutOfFrame(CourtTrackError):
    """Synthetic scenario cannot keep every target inside the frame."""


class TooLarge(CourtTrackError):
    """Brute-force assignment limited to 9 rows/columns."""


class InputFormatError(CourtTrackError):
    """Malformed input file; carries file, line and field context."""

    def __init__(self, path, message, line=None, field=None):
        self.path = str(path)
        self.line = line
        self.field = field
        loc = self.path
        if line is not None:
            loc += f":{line}"
        if field is not None:
            loc += f" (field '{field}')"
        super().__init__(f"{loc}: {message}")
