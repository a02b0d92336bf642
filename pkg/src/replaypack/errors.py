"""Exception types shared across the package.

Everything raised deliberately by this package derives from
:class:`ReplayPackError`, so callers (including the CLI) can separate
domain validation failures from genuine I/O errors.
"""

from __future__ import annotations


class ReplayPackError(Exception):
    """Base class for validation and computation errors raised here."""


class FeatureFormatError(ReplayPackError):
    """A feature file violates the binary container contract."""


class MalformedHeaderError(FeatureFormatError):
    """Header is too short, has the wrong magic, or declares a zero dim."""


class BodySizeError(FeatureFormatError):
    """Declared dim*count does not match the number of bytes in the body."""


class NonFiniteValueError(FeatureFormatError):
    """A stored value is NaN or infinite; the message names the column."""


class SidecarError(FeatureFormatError):
    """The id sidecar is missing entries, has extras, or repeats an id."""


class ManifestError(ReplayPackError):
    """Dataset manifest fails schema or uniqueness validation."""


class EmptyClassError(ReplayPackError):
    """An operation needs at least one sample of a class and got none."""


class QualityRangeError(ReplayPackError):
    """A quality value falls outside the backend's supported range."""


class AlignmentError(ReplayPackError):
    """Two matrices that must share shape and sample ids do not."""


class RankDeficientError(ReplayPackError):
    """More columns than dimensions: the Gram determinant is exactly zero."""


class NearSingularError(ReplayPackError):
    """Factorization failed at every jitter level.

    Attributes:
        jitters: the diagonal jitter values that were attempted, in order.
    """

    def __init__(self, message: str, jitters: tuple[float, ...]):
        super().__init__(message)
        self.jitters = tuple(jitters)


class ZeroColumnError(ReplayPackError):
    """A feature column has zero norm and cannot be normalized."""


class BufferIntegrityError(ReplayPackError):
    """A stored buffer disagrees with its manifest."""
