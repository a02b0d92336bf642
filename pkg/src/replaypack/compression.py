"""Compressor backends, storage budgets, and greedy prefix packing.

Packing answers one question: walking a fixed exemplar ranking, how many
samples fit in the byte budget at quality q?  Because the ranking never
changes with q, the stored set at any quality is a prefix of the same
order, and shrinking a buffer later just keeps a shorter prefix.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import EmptyClassError, ManifestError, QualityRangeError
from .features import DatasetManifest, SampleRecord
from .selection import ClassRanking


def linear_size(original_byte_size: int, quality: int) -> int:
    """Byte size of the synthetic codec: proportional to quality, min 1."""
    return max(1, round(original_byte_size * quality / 100))


class CompressorBackend:
    """Deterministic payload codec with a byte-size model.

    ``lossless_features`` marks backends whose compression leaves feature
    vectors untouched, so the selection pipeline reuses the original
    feature matrix for every candidate quality.
    """

    name: str = "base"
    quality_range: tuple[int, int] = (1, 100)
    lossless_features: bool = False

    def check_quality(self, quality: int) -> None:
        lo, hi = self.quality_range
        if not isinstance(quality, int) or not lo <= quality <= hi:
            raise QualityRangeError(
                f"quality {quality!r} outside [{lo}, {hi}] for backend {self.name!r}"
            )

    def compress(self, payload: bytes, quality: int) -> bytes:
        raise NotImplementedError

    def compressed_size(self, sample: SampleRecord, quality: int) -> int:
        """Byte size of ``sample`` at ``quality`` without storing it."""
        raise NotImplementedError


class SyntheticBackend(CompressorBackend):
    """Closed-form codec: size scales linearly with quality.

    The blob content is the payload prefix of the modeled size, so sizes
    are exact and the transform is trivially deterministic.  At q = 100
    the full payload passes through unchanged.
    """

    name = "synthetic"

    def compress(self, payload: bytes, quality: int) -> bytes:
        self.check_quality(quality)
        return payload[: linear_size(len(payload), quality)]

    def compressed_size(self, sample: SampleRecord, quality: int) -> int:
        self.check_quality(quality)
        return linear_size(sample.original_byte_size, quality)


class IdentityBackend(SyntheticBackend):
    """Size model of the synthetic codec with zero feature degradation.

    Models an analytically ideal codec: storage still shrinks with
    quality, but compressed features equal the originals, so every
    volume ratio is exactly 1.
    """

    name = "identity"
    lossless_features = True


class JpegBackend(CompressorBackend):
    """Re-encode image payloads as JPEG at the requested quality.

    JPEG at quality 100 can exceed the size of an already-JPEG source,
    so for JPEG payloads q = 100 stores the original bytes instead of
    re-encoding; that keeps the top of the quality range lossless and
    bounds it at the original size.
    """

    name = "jpeg"

    def __init__(self) -> None:
        self._size_cache: dict[tuple[str, int], int] = {}

    def compress(self, payload: bytes, quality: int) -> bytes:
        self.check_quality(quality)
        if quality == 100 and payload[:2] == b"\xff\xd8":
            return payload
        from PIL import Image

        with Image.open(io.BytesIO(payload)) as img:
            if img.mode not in ("RGB", "L"):
                img = img.convert("RGB")
            out = io.BytesIO()
            img.save(out, format="JPEG", quality=quality)
        return out.getvalue()

    def compressed_size(self, sample: SampleRecord, quality: int) -> int:
        self.check_quality(quality)
        key = (sample.payload_path, quality)
        if key not in self._size_cache:
            payload = Path(sample.payload_path).read_bytes()
            self._size_cache[key] = len(self.compress(payload, quality))
        return self._size_cache[key]


_BACKENDS: dict[str, Callable[[], CompressorBackend]] = {
    "synthetic": SyntheticBackend,
    "identity": IdentityBackend,
    "jpeg": JpegBackend,
}


def make_backend(name: str) -> CompressorBackend:
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise ManifestError(
            f"unknown backend {name!r}; expected one of {sorted(_BACKENDS)}"
        ) from None


class BudgetScope(str, Enum):
    PER_CLASS = "per_class"
    PER_PHASE = "per_phase"


@dataclass
class StorageBudget:
    """Byte budgets expressed as K original-sample equivalents per scope.

    ``resolved_bytes`` maps a class label (per_class) or phase index
    (per_phase) to its byte allowance: K times the mean original byte
    size of the scope's samples, rounded to the nearest integer, never
    below 1.
    """

    scope: BudgetScope
    equivalent_originals: int
    resolved_bytes: dict[str | int, int]

    def __post_init__(self) -> None:
        self.scope = BudgetScope(self.scope)
        if self.equivalent_originals < 1:
            raise ValueError("equivalent_originals must be positive")
        for key, value in self.resolved_bytes.items():
            if value < 1:
                raise ValueError(f"budget for {key!r} must be at least 1 byte")

    @classmethod
    def resolve(
        cls,
        manifest: DatasetManifest,
        equivalent_originals: int,
        scope: BudgetScope | str = BudgetScope.PER_CLASS,
    ) -> "StorageBudget":
        scope = BudgetScope(scope)
        groups: dict[str | int, list[int]] = {}
        for rec in manifest.samples:
            key: str | int = (
                rec.class_label if scope is BudgetScope.PER_CLASS else rec.phase_index
            )
            groups.setdefault(key, []).append(rec.original_byte_size)
        if not groups:
            raise EmptyClassError("manifest has no samples to budget over")
        resolved = {
            key: max(1, int(equivalent_originals * (sum(sizes) / len(sizes)) + 0.5))
            for key, sizes in groups.items()
        }
        return cls(
            scope=scope,
            equivalent_originals=equivalent_originals,
            resolved_bytes=resolved,
        )

    def to_dict(self) -> dict:
        return {
            "scope": self.scope.value,
            "equivalent_originals": self.equivalent_originals,
            "resolved_bytes": {str(k): v for k, v in self.resolved_bytes.items()},
        }


@dataclass
class PackingResult:
    """Outcome of packing one ranking prefix at one quality.

    ``compression_rate`` is the packed count divided by how many
    uncompressed originals the same budget holds; it is None when the
    caller supplied no original-size reference.
    """

    quality: int
    selected_ids: list[str]
    n_q_mb: int
    bytes_used: int
    compression_rate: float | None

    def __post_init__(self) -> None:
        if self.n_q_mb != len(self.selected_ids):
            raise ValueError("n_q_mb must equal len(selected_ids)")


Sizer = Callable[[str], int]


def _ranked_ids(ranking: ClassRanking | Sequence[str]) -> list[str]:
    if isinstance(ranking, ClassRanking):
        return list(ranking.ranked_ids)
    return list(ranking)


def _prefix_count(ids: Sequence[str], budget_bytes: int, sizer: Sizer) -> tuple[int, int]:
    used = 0
    n = 0
    for sample_id in ids:
        size = sizer(sample_id)
        if size < 0:
            raise ValueError(f"negative size for sample {sample_id!r}")
        if used + size > budget_bytes:
            break
        used += size
        n += 1
    return n, used


def pack_for_quality(
    ranking: ClassRanking | Sequence[str],
    quality: int,
    budget_bytes: int,
    sizer: Sizer,
    original_sizer: Sizer | None = None,
) -> PackingResult:
    """Longest ranking prefix whose compressed bytes fit the budget.

    The result is maximal: adding the next ranked sample would exceed
    ``budget_bytes`` (or the ranking is exhausted).  ``original_sizer``
    gives uncompressed sizes for the compression-rate denominator.
    """
    if budget_bytes < 0:
        raise ValueError("budget must be non-negative")
    ids = _ranked_ids(ranking)
    n, used = _prefix_count(ids, budget_bytes, sizer)
    rate: float | None = None
    if original_sizer is not None:
        n_ref, _ = _prefix_count(ids, budget_bytes, original_sizer)
        rate = n / n_ref if n_ref else None
    return PackingResult(
        quality=quality,
        selected_ids=ids[:n],
        n_q_mb=n,
        bytes_used=used,
        compression_rate=rate,
    )


def quantity_curve(
    ranking: ClassRanking | Sequence[str],
    qualities: Sequence[int],
    budget_bytes: int,
    backend: CompressorBackend,
    samples: Mapping[str, SampleRecord],
) -> list[PackingResult]:
    """One packing result per candidate quality, same ranking and budget.

    With a size model that increases with quality, the packed count is
    non-increasing in q, and the rate at q = 100 is exactly 1.
    """
    ids = _ranked_ids(ranking)
    original_sizer = lambda s: samples[s].original_byte_size
    out = []
    for quality in qualities:
        sizer = lambda s, q=quality: backend.compressed_size(samples[s], q)
        out.append(pack_for_quality(ids, quality, budget_bytes, sizer, original_sizer))
    return out


def interleave_rankings(rankings: Sequence[ClassRanking]) -> list[str]:
    """Round-robin merge of class rankings, rank-major then class label.

    Used for per-phase budgets: packing a prefix of this order keeps the
    per-class selections balanced, and each class's share is still a
    prefix of its own ranking.
    """
    ordered = sorted(rankings, key=lambda r: r.class_label)
    out: list[str] = []
    depth = max((len(r.ranked_ids) for r in ordered), default=0)
    for rank in range(depth):
        for ranking in ordered:
            if rank < len(ranking.ranked_ids):
                out.append(ranking.ranked_ids[rank])
    return out


def pack_phase(
    rankings: Sequence[ClassRanking],
    samples: Mapping[str, SampleRecord],
    phase_index: int,
    quality: int,
    budget: StorageBudget,
    backend: CompressorBackend,
) -> tuple[dict[str, list[str]], PackingResult]:
    """Pack one phase at one quality under either budget scope.

    Returns the selected ids per class (each a prefix of its ranking)
    and a merged phase-level result whose rate is measured against how
    many uncompressed originals the same budget holds.
    """
    sizer = lambda s: backend.compressed_size(samples[s], quality)
    original_sizer = lambda s: samples[s].original_byte_size
    ordered = sorted(rankings, key=lambda r: r.class_label)
    if budget.scope is BudgetScope.PER_CLASS:
        per_class: dict[str, list[str]] = {}
        used = 0
        n_total = 0
        n_ref_total = 0
        for ranking in ordered:
            try:
                budget_bytes = budget.resolved_bytes[ranking.class_label]
            except KeyError:
                raise ManifestError(
                    f"no per-class budget for {ranking.class_label!r}"
                ) from None
            result = pack_for_quality(
                ranking, quality, budget_bytes, sizer, original_sizer
            )
            per_class[ranking.class_label] = result.selected_ids
            used += result.bytes_used
            n_total += result.n_q_mb
            n_ref_total += _prefix_count(ranking.ranked_ids, budget_bytes, original_sizer)[0]
        merged = PackingResult(
            quality=quality,
            selected_ids=[s for r in ordered for s in per_class[r.class_label]],
            n_q_mb=n_total,
            bytes_used=used,
            compression_rate=(n_total / n_ref_total) if n_ref_total else None,
        )
        return per_class, merged

    try:
        budget_bytes = budget.resolved_bytes[phase_index]
    except KeyError:
        raise ManifestError(f"no per-phase budget for phase {phase_index}") from None
    order = interleave_rankings(ordered)
    merged = pack_for_quality(order, quality, budget_bytes, sizer, original_sizer)
    per_class = {r.class_label: [] for r in ordered}
    for sample_id in merged.selected_ids:
        per_class[samples[sample_id].class_label].append(sample_id)
    return per_class, merged
