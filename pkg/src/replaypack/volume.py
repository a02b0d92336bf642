"""Gram log-volumes of unit feature columns and compressed-to-original ratios.

The volume of a subset is sqrt(det(M^T M)) for the matrix M whose columns
are the subset's L2-normalized features.  Everything stays in log space;
the raw determinant is never materialized, so subsets of a few hundred
samples are fine.  The diagnostic for a compressed subset is the ratio

    ratio = exp(log_vol_compressed - log_vol_original)

computed on the same sample ids, columns aligned.  A ratio near 1 means
compression left the subset's feature geometry alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AlignmentError,
    NearSingularError,
    RankDeficientError,
    ZeroColumnError,
)
from .features import FeatureMatrix

# Escalation ladder for the Gram diagonal.  Near-duplicate exemplars make
# the Gram ill-conditioned; both sides of a ratio get the same jitter so
# the bias largely cancels.
JITTER_LADDER: tuple[float, ...] = (0.0, 1e-12, 1e-10, 1e-8)


@dataclass
class VolumeReport:
    """Log-volumes and their ratio for one subset (or one phase).

    Phase-level reports carry per-class children in ``per_class``; their
    log fields are per-class means, so ``log_ratio`` is the mean of the
    class log-ratios (a geometric mean of ratios).
    """

    quality: int | None
    n: int
    log_vol_original: float
    log_vol_compressed: float
    log_ratio: float
    ratio: float
    jitter: float = 0.0
    truncated: bool = False
    class_label: str | None = None
    per_class: list["VolumeReport"] | None = None

    def to_dict(self) -> dict:
        doc = {
            "quality": self.quality,
            "n": self.n,
            "log_vol_original": self.log_vol_original,
            "log_vol_compressed": self.log_vol_compressed,
            "log_ratio": self.log_ratio,
            "ratio": self.ratio,
            "jitter": self.jitter,
            "truncated": self.truncated,
        }
        if self.class_label is not None:
            doc["class"] = self.class_label
        if self.per_class is not None:
            doc["per_class"] = [r.to_dict() for r in self.per_class]
        return doc


def normalize_columns(matrix: FeatureMatrix) -> FeatureMatrix:
    """Scale every column to unit L2 norm (float64).

    A zero-norm column cannot be normalized; the error names its sample.
    """
    values = matrix.values.astype(np.float64)
    norms = np.linalg.norm(values, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumnError(
            f"column for sample {matrix.sample_ids[int(zero[0])]!r} has zero norm"
        )
    return FeatureMatrix(values / norms, list(matrix.sample_ids))


def _check_unit_columns(matrix: FeatureMatrix) -> None:
    norms = np.linalg.norm(matrix.values.astype(np.float64), axis=0)
    if norms.size and np.abs(norms - 1.0).max() > 1e-6:
        raise ValueError("columns are not unit-normalized; call normalize_columns")


def _try_gram_logdet(values: np.ndarray, jitter: float) -> float | None:
    gram = values.T @ values
    if jitter:
        gram = gram + jitter * np.eye(gram.shape[0])
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return None
    diag = np.diagonal(chol)
    if not (diag > 0).all():
        return None
    return float(2.0 * np.log(diag).sum())


def log_volume(matrix: FeatureMatrix) -> float:
    """0.5 * logdet of the Gram of a unit-column matrix.

    Walks the jitter ladder until the SPD factorization succeeds.  More
    columns than rows means an exactly singular Gram and is rejected
    outright.
    """
    value, _ = _log_volume_jittered(matrix)
    return value


def _log_volume_jittered(matrix: FeatureMatrix) -> tuple[float, float]:
    _check_unit_columns(matrix)
    if matrix.count == 0:
        raise ValueError("need at least one column")
    if matrix.count > matrix.dim:
        raise RankDeficientError(
            f"{matrix.count} columns in dimension {matrix.dim}: volume is zero"
        )
    values = matrix.values.astype(np.float64)
    for jitter in JITTER_LADDER:
        logdet = _try_gram_logdet(values, jitter)
        if logdet is not None:
            return 0.5 * logdet, jitter
    raise NearSingularError(
        f"Gram factorization failed at all jitter levels {JITTER_LADDER}",
        JITTER_LADDER,
    )


def volume_ratio(
    compressed: FeatureMatrix,
    original: FeatureMatrix,
    quality: int | None = None,
    class_label: str | None = None,
    truncated: bool = False,
) -> VolumeReport:
    """Volume ratio of a compressed subset to its original twin.

    Both matrices must hold the same samples in the same order.  The two
    Grams are factorized at the same jitter level (escalating together)
    so the jitter bias mostly cancels in the ratio; identical inputs give
    a ratio of exactly 1.
    """
    if compressed.dim != original.dim or compressed.count != original.count:
        raise AlignmentError(
            f"shape mismatch: compressed {compressed.dim}x{compressed.count}, "
            f"original {original.dim}x{original.count}"
        )
    if compressed.sample_ids != original.sample_ids:
        raise AlignmentError("sample ids differ or are ordered differently")
    for side_name, side in (("compressed", compressed), ("original", original)):
        _check_unit_columns(side)
        if side.count > side.dim:
            raise RankDeficientError(
                f"{side_name} side: {side.count} columns in dimension {side.dim}"
            )
    if compressed.count == 0:
        raise ValueError("need at least one column")

    comp64 = compressed.values.astype(np.float64)
    orig64 = original.values.astype(np.float64)
    for jitter in JITTER_LADDER:
        logdet_c = _try_gram_logdet(comp64, jitter)
        logdet_o = _try_gram_logdet(orig64, jitter)
        if logdet_c is not None and logdet_o is not None:
            log_vol_c = 0.5 * logdet_c
            log_vol_o = 0.5 * logdet_o
            log_ratio = log_vol_c - log_vol_o
            return VolumeReport(
                quality=quality,
                n=compressed.count,
                log_vol_original=log_vol_o,
                log_vol_compressed=log_vol_c,
                log_ratio=log_ratio,
                ratio=float(np.exp(log_ratio)),
                jitter=jitter,
                truncated=truncated,
                class_label=class_label,
            )
    side = "compressed" if _try_gram_logdet(comp64, JITTER_LADDER[-1]) is None else "original"
    raise NearSingularError(
        f"{side} side failed factorization at all jitter levels {JITTER_LADDER}",
        JITTER_LADDER,
    )


def phase_ratio(per_class: Sequence[VolumeReport]) -> VolumeReport:
    """Aggregate per-class reports of one phase at one quality.

    The phase log-ratio is the arithmetic mean of the class log-ratios,
    i.e. the geometric mean of the class ratios; a blown-up class cannot
    hide behind a shrunken one the way an arithmetic mean of ratios
    straddling 1 would allow.
    """
    reports = list(per_class)
    if not reports:
        raise ValueError("need at least one per-class report")
    qualities = {r.quality for r in reports}
    if len(qualities) != 1:
        raise ValueError(f"mixed qualities in one phase: {sorted(qualities)}")
    log_vol_o = float(np.mean([r.log_vol_original for r in reports]))
    log_vol_c = float(np.mean([r.log_vol_compressed for r in reports]))
    log_ratio = float(np.mean([r.log_ratio for r in reports]))
    return VolumeReport(
        quality=reports[0].quality,
        n=sum(r.n for r in reports),
        log_vol_original=log_vol_o,
        log_vol_compressed=log_vol_c,
        log_ratio=log_ratio,
        ratio=float(np.exp(log_ratio)),
        jitter=max(r.jitter for r in reports),
        truncated=any(r.truncated for r in reports),
        per_class=reports,
    )


def averaged_ratio(phase_reports: Sequence[VolumeReport]) -> float:
    """Arithmetic mean of phase-level ratios across phases."""
    reports = list(phase_reports)
    if not reports:
        raise ValueError("need at least one phase report")
    return float(np.mean([r.ratio for r in reports]))
