"""Quality selection: best packed count subject to a volume-ratio gate.

For each candidate quality q the pipeline packs the exemplar ranking
into the byte budget, compares the feature volume of the packed subset
against its uncompressed twin, and keeps q only when the ratio sits
inside the epsilon band around 1.  Among the survivors the winner is
the one that stores the most samples; with sizes that grow with q that
is simply the smallest feasible quality.  Ranking candidates needs only
the two Gram log-determinants per packed subset, nothing heavier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .compression import (
    CompressorBackend,
    PackingResult,
    StorageBudget,
    pack_phase,
)
from .errors import ManifestError, ReplayPackError
from .features import FeatureMatrix, SampleRecord
from .selection import ClassRanking
from .volume import VolumeReport, normalize_columns, phase_ratio, volume_ratio

DEFAULT_CANDIDATES: tuple[int, ...] = (10, 25, 50, 75, 90)
DEFAULT_EPSILON: float = 0.5


@dataclass
class QualityCandidateSet:
    """Candidate qualities (strictly increasing) and the feasibility band."""

    candidates: tuple[int, ...] = DEFAULT_CANDIDATES
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        self.candidates = tuple(int(q) for q in self.candidates)
        if not self.candidates:
            raise ValueError("need at least one candidate quality")
        if any(b <= a for a, b in zip(self.candidates, self.candidates[1:])):
            raise ValueError("candidates must be strictly increasing")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class QualityReport:
    """One candidate's packed count, volume ratio, and feasibility."""

    quality: int
    n_q_mb: int
    ratio: float
    feasible: bool
    volume: VolumeReport | None = None
    packing: PackingResult | None = None

    def to_dict(self) -> dict:
        doc = {
            "quality": self.quality,
            "n_q_mb": self.n_q_mb,
            "ratio": self.ratio,
            "feasible": self.feasible,
        }
        if self.volume is not None:
            doc["volume"] = self.volume.to_dict()
        if self.packing is not None:
            doc["packing"] = {
                "quality": self.packing.quality,
                "n_q_mb": self.packing.n_q_mb,
                "bytes_used": self.packing.bytes_used,
                "compression_rate": self.packing.compression_rate,
                "selected_ids": self.packing.selected_ids,
            }
        return doc


@dataclass
class QualityDecision:
    """The chosen quality plus everything needed to audit the choice."""

    chosen_quality: int
    chosen_n: int
    feasible_set: list[int]
    fallback_used: bool
    reports: list[QualityReport]
    per_phase: list["QualityDecision"] | None = None

    def to_dict(self) -> dict:
        doc = {
            "chosen_quality": self.chosen_quality,
            "chosen_n": self.chosen_n,
            "feasible_set": self.feasible_set,
            "fallback_used": self.fallback_used,
            "reports": [r.to_dict() for r in self.reports],
        }
        if self.per_phase is not None:
            doc["per_phase"] = [d.to_dict() for d in self.per_phase]
        return doc


@dataclass
class PhaseInputs:
    """Everything the selector needs about one incremental phase.

    ``original_features`` and each entry of ``features_by_quality`` must
    carry a column for every id in the phase's rankings.  Backends that
    are feature-lossless ignore ``features_by_quality`` entirely.
    """

    phase_index: int
    rankings: list[ClassRanking]
    original_features: FeatureMatrix
    features_by_quality: Mapping[int, FeatureMatrix]
    samples: Mapping[str, SampleRecord]

    def features_at(self, quality: int, backend: CompressorBackend) -> FeatureMatrix:
        if backend.lossless_features:
            return self.original_features
        try:
            return self.features_by_quality[quality]
        except KeyError:
            raise ManifestError(
                f"phase {self.phase_index}: no feature matrix for quality {quality}"
            ) from None


def evaluate_candidates(
    inputs: PhaseInputs,
    config: QualityCandidateSet,
    budget: StorageBudget,
    backend: CompressorBackend,
) -> list[QualityReport]:
    """Pack and volume-check every candidate quality for one phase.

    Per class, the subset used for the volume is the packed prefix,
    truncated to the feature dimension when more samples fit than there
    are dimensions (a taller prefix has an exactly-zero Gram volume);
    the report flags that truncation.  The phase ratio is the geometric
    mean of the per-class ratios.
    """
    for quality in config.candidates:
        backend.check_quality(quality)
    dim = inputs.original_features.dim
    reports: list[QualityReport] = []
    for quality in config.candidates:
        per_class, merged = pack_phase(
            inputs.rankings, inputs.samples, inputs.phase_index, quality, budget, backend
        )
        compressed_features = inputs.features_at(quality, backend)
        class_reports = []
        for label in sorted(per_class):
            ids = per_class[label]
            if not ids:
                continue
            truncated = len(ids) > dim
            vol_ids = ids[:dim]
            original = normalize_columns(inputs.original_features.restrict(vol_ids))
            compressed = normalize_columns(compressed_features.restrict(vol_ids))
            class_reports.append(
                volume_ratio(
                    compressed,
                    original,
                    quality=quality,
                    class_label=label,
                    truncated=truncated,
                )
            )
        if not class_reports:
            raise ReplayPackError(
                f"phase {inputs.phase_index}: budget too small to store any "
                f"sample at quality {quality}"
            )
        phase_report = phase_ratio(class_reports)
        reports.append(
            QualityReport(
                quality=quality,
                n_q_mb=merged.n_q_mb,
                ratio=phase_report.ratio,
                feasible=abs(phase_report.ratio - 1.0) < config.epsilon,
                volume=phase_report,
                packing=merged,
            )
        )
    return reports


def select_quality(
    reports: Sequence[QualityReport], config: QualityCandidateSet
) -> QualityDecision:
    """Pick the feasible candidate that packs the most samples.

    Ties break toward the larger quality (same quantity, better fidelity).
    With no feasible candidate the decision falls back to max(Q), the
    least-distorted candidate, and says so.
    """
    by_quality = {}
    for report in reports:
        if report.quality in by_quality:
            raise ValueError(f"duplicate report for quality {report.quality}")
        by_quality[report.quality] = report
    missing = [q for q in config.candidates if q not in by_quality]
    extra = [q for q in by_quality if q not in config.candidates]
    if missing or extra:
        raise ValueError(
            f"reports do not match candidates: missing {missing}, extra {extra}"
        )
    ordered = [by_quality[q] for q in config.candidates]
    feasible = [r for r in ordered if r.feasible]
    if feasible:
        best = max(feasible, key=lambda r: (r.n_q_mb, r.quality))
        return QualityDecision(
            chosen_quality=best.quality,
            chosen_n=best.n_q_mb,
            feasible_set=[r.quality for r in feasible],
            fallback_used=False,
            reports=list(ordered),
        )
    fallback = ordered[-1]
    return QualityDecision(
        chosen_quality=fallback.quality,
        chosen_n=fallback.n_q_mb,
        feasible_set=[],
        fallback_used=True,
        reports=list(ordered),
    )


def decide_across_phases(
    per_phase_reports: Sequence[Sequence[QualityReport]],
    config: QualityCandidateSet,
) -> QualityDecision:
    """One decision over many phases: feasibility on the mean phase ratio.

    Every phase must report every candidate exactly once.  The averaged
    row for candidate q carries the arithmetic mean of the phase ratios
    and the total packed count across phases; per-phase decisions ride
    along for drift inspection.
    """
    phases = [list(reports) for reports in per_phase_reports]
    if not phases:
        raise ValueError("need reports for at least one phase")
    per_phase_decisions = [select_quality(reports, config) for reports in phases]
    averaged: list[QualityReport] = []
    for quality in config.candidates:
        rows = []
        for reports in phases:
            matches = [r for r in reports if r.quality == quality]
            if len(matches) != 1:
                raise ValueError(
                    f"each phase must report quality {quality} exactly once"
                )
            rows.append(matches[0])
        mean_ratio = sum(r.ratio for r in rows) / len(rows)
        averaged.append(
            QualityReport(
                quality=quality,
                n_q_mb=sum(r.n_q_mb for r in rows),
                ratio=mean_ratio,
                feasible=abs(mean_ratio - 1.0) < config.epsilon,
            )
        )
    decision = select_quality(averaged, config)
    decision.per_phase = per_phase_decisions
    return decision
