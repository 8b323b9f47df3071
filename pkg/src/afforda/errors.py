"""Exception and warning vocabulary shared across the toolkit.

Every recoverable failure mode has its own class so callers (and tests) can
catch precise conditions. ``AffordanceError.stage`` and ``sample_id`` are
filled in when an error crosses a composition boundary, e.g. when the
end-to-end clip annotator or a CLI batch re-raises a sub-operation failure.
"""

from __future__ import annotations


class AffordanceError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str = "", *, stage: str | None = None,
                 sample_id: str | None = None):
        super().__init__(message)
        self.stage = stage
        self.sample_id = sample_id

    def __str__(self) -> str:
        base = super().__str__()
        tags = []
        if self.stage:
            tags.append(f"stage={self.stage}")
        if self.sample_id:
            tags.append(f"sample={self.sample_id}")
        return f"{base} [{', '.join(tags)}]" if tags else base


# --- narration / detection selection ---------------------------------------

class MissingArticleError(AffordanceError):
    """Narration contains no 'the' token to split verb from noun."""


class EmptySideError(AffordanceError):
    """Verb or noun side of the narration is empty after the split."""


class NoDetectionsError(AffordanceError):
    """No frame in the clip carries a detection confidence."""


# --- geometry ----------------------------------------------------------------

class UnderdeterminedError(AffordanceError):
    """Fewer than four usable correspondences."""


class DegenerateError(AffordanceError):
    """Correspondence configuration is collinear/coincident (ill-conditioned)."""


class NoConsensusError(AffordanceError):
    """RANSAC found no consensus set of at least four inliers."""


class AtInfinityError(AffordanceError):
    """A point maps to the plane at infinity under the homography."""

    def __init__(self, message: str = "", *, indices: list[int] | None = None, **kw):
        super().__init__(message, **kw)
        self.indices = indices or []


class SingularError(AffordanceError):
    """Matrix is singular (or numerically indistinguishable from singular)."""


# --- contact annotation -------------------------------------------------------

class NoContactError(AffordanceError):
    """No contact-point candidates: empty hand boundary inside the object box."""


class MisalignedInputsError(AffordanceError):
    """Per-frame input lists do not align with the clip's frames."""


class AllPointsLostError(AffordanceError):
    """Every projected point left the image before the stop frame."""


class EmptyPointsError(AffordanceError):
    """Rasterization requires at least one in-bounds point."""


# --- motion extraction --------------------------------------------------------

class EmptyAfterCleaningError(AffordanceError):
    """DBSCAN labelled every trajectory point as noise."""


class DegenerateTrajectoryError(AffordanceError):
    """All trajectory points coincide; no direction is defined."""


class CancelledOutError(AffordanceError):
    """Averaged directions cancel to (numerically) zero."""


class ZeroVectorError(AffordanceError):
    """Operation requires a nonzero vector."""


class NoUsableTrajectoriesError(AffordanceError):
    """Every input trajectory was dropped during cleaning/estimation."""


class InvalidDirectionLabelError(AffordanceError):
    """Text does not parse as one of the 26 discrete direction labels."""


# --- metrics -------------------------------------------------------------------

class ZeroMassError(AffordanceError):
    """Map has zero total mass and cannot be normalized."""


class EmptyMaskError(AffordanceError):
    """Mask contains no foreground pixels."""


class EmptyFixationsError(AffordanceError):
    """Fixation set is empty."""


class ShapeMismatchError(AffordanceError):
    """Operands have different raster dimensions."""


class NotNormalizedError(AffordanceError):
    """Map is expected to sum to one."""


# --- verifier loop ---------------------------------------------------------------

class BackendError(AffordanceError):
    """Model or segmentation backend failed (network, protocol, exhausted replay)."""


class UnparseableReplyError(AffordanceError):
    """Backend reply could not be parsed, including after the one retry."""


class OverlappingPartitionsError(AffordanceError):
    """Partition masks overlap; candidates must be pairwise disjoint."""


class BadKError(AffordanceError):
    """Requested candidate count cannot tile the image."""


# --- persistence -------------------------------------------------------------------

class ParseError(AffordanceError):
    """Malformed manifest/log document."""

    def __init__(self, message: str = "", *, line: int | None = None,
                 field: str | None = None, **kw):
        super().__init__(message, **kw)
        self.line = line
        self.field = field


class MissingFileError(AffordanceError):
    """One or more referenced files are absent; ``paths`` lists every one."""

    def __init__(self, message: str = "", *, paths: list[str] | None = None, **kw):
        super().__init__(message, **kw)
        self.paths = paths or []


class BadCountsError(AffordanceError):
    """RLE counts are negative or do not sum to width*height."""


class UnsupportedFormatError(AffordanceError):
    """Raster file is not an 8-bit single-channel image."""


class RaggedTrajectoryError(AffordanceError):
    """Trajectory document has inconsistent per-frame point arrays."""


class NonFiniteError(AffordanceError):
    """Trajectory document contains NaN/Inf coordinates."""


# --- warnings (flagged, non-fatal conditions) -----------------------------------

class AffordanceWarning(UserWarning):
    """Base class for flagged, non-fatal conditions."""


class AmbiguousSpectrumWarning(AffordanceWarning):
    """Top two covariance eigenvalues are (near-)equal; direction is unstable."""


class AllFixationsWarning(AffordanceWarning):
    """Every pixel is a fixation; AUC has no negatives and returns 1."""


class EmptyLatticeWarning(AffordanceWarning):
    """No lattice point fell inside the mask; fell back to the mask centroid."""


class TornLogWarning(AffordanceWarning):
    """Log file ended in a torn (unterminated) line that was ignored."""
