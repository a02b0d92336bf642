"""Replay buffer persistence: compressed blobs plus a JSON manifest.

Layout under the buffer directory::

    manifest.json
    <phase>/<class>/<id>.bin

The manifest is the source of truth; loading re-checks it against the
blobs (size-only, no checksums).  Entries are sorted by (phase, class,
rank) and the manifest is written to a temp file first and renamed over
the old one, so a crash never leaves a half-written manifest behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .compression import BudgetScope, CompressorBackend, StorageBudget, pack_phase
from .errors import BufferIntegrityError, ManifestError
from .features import DatasetManifest, SampleRecord
from .selection import ClassRanking
from .selector import QualityDecision

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class BufferEntry:
    """One stored sample; ``path`` is relative to the buffer directory."""

    id: str
    class_label: str
    phase_index: int
    rank: int
    quality: int
    byte_size: int
    path: str


@dataclass
class BufferManifest:
    version: int
    budget: StorageBudget
    chosen_quality: int
    entries: list[BufferEntry]
    totals: dict[str, int]
    base_dir: Path | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "budget": self.budget.to_dict(),
            "chosen_quality": self.chosen_quality,
            "entries": [
                {
                    "id": e.id,
                    "class": e.class_label,
                    "phase": e.phase_index,
                    "rank": e.rank,
                    "quality": e.quality,
                    "bytes": e.byte_size,
                    "path": e.path,
                }
                for e in self.entries
            ],
            "totals": self.totals,
        }

    def entries_of_class(self, label: str) -> list[BufferEntry]:
        return [e for e in self.entries if e.class_label == label]


def _scope_key(budget: StorageBudget, entry: BufferEntry) -> str:
    if budget.scope is BudgetScope.PER_CLASS:
        return entry.class_label
    return str(entry.phase_index)


def _compute_totals(budget: StorageBudget, entries: Sequence[BufferEntry]) -> dict[str, int]:
    totals: dict[str, int] = {}
    for entry in entries:
        key = _scope_key(budget, entry)
        totals[key] = totals.get(key, 0) + entry.byte_size
    return dict(sorted(totals.items()))


def _check_totals(budget: StorageBudget, totals: Mapping[str, int]) -> None:
    limits = {str(k): v for k, v in budget.resolved_bytes.items()}
    for key, used in totals.items():
        if key not in limits:
            raise BufferIntegrityError(f"totals key {key!r} has no budget")
        if used > limits[key]:
            raise BufferIntegrityError(
                f"stored bytes {used} exceed budget {limits[key]} for {key!r}"
            )


def _write_manifest(manifest: BufferManifest, directory: Path) -> None:
    payload = json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
    tmp = directory / (MANIFEST_NAME + ".tmp")
    tmp.write_text(payload, encoding="utf-8")
    os.replace(tmp, directory / MANIFEST_NAME)


def synthetic_payload(sample: SampleRecord) -> bytes:
    """Deterministic stand-in payload for samples with no file on disk."""
    pattern = sample.id.encode("utf-8") or b"\x00"
    reps = sample.original_byte_size // len(pattern) + 1
    return (pattern * reps)[: sample.original_byte_size]


def load_payload(sample: SampleRecord) -> bytes:
    """Payload bytes from disk, or a synthetic stand-in when absent."""
    path = Path(sample.payload_path)
    if path.exists():
        data = path.read_bytes()
        if len(data) != sample.original_byte_size:
            raise ManifestError(
                f"sample {sample.id!r}: payload is {len(data)} bytes, "
                f"manifest says {sample.original_byte_size}"
            )
        return data
    return synthetic_payload(sample)


def build_buffer(
    decision: QualityDecision | int,
    dataset: DatasetManifest,
    rankings: Mapping[str, ClassRanking],
    backend: CompressorBackend,
    budget: StorageBudget,
    out_dir: str | Path,
) -> BufferManifest:
    """Compress the packed prefix of every class and persist it.

    ``decision`` may be a full QualityDecision or a bare quality.  The
    packing is recomputed here (it is pure and cheap), so the buffer is
    byte-for-byte reproducible from the same inputs; re-running over an
    existing buffer directory rewrites identical content.
    """
    quality = decision if isinstance(decision, int) else decision.chosen_quality
    backend.check_quality(quality)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = dataset.by_id()

    entries: list[BufferEntry] = []
    for phase in dataset.phases:
        phase_rankings = []
        for label in phase.classes:
            try:
                phase_rankings.append(rankings[label])
            except KeyError:
                raise ManifestError(f"no ranking for class {label!r}") from None
        if not phase_rankings:
            continue
        per_class, _ = pack_phase(
            phase_rankings, samples, phase.index, quality, budget, backend
        )
        for label in sorted(per_class):
            for rank, sample_id in enumerate(per_class[label]):
                sample = samples[sample_id]
                blob = backend.compress(load_payload(sample), quality)
                rel = Path(str(phase.index)) / label / f"{sample_id}.bin"
                target = out_dir / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(blob)
                entries.append(
                    BufferEntry(
                        id=sample_id,
                        class_label=label,
                        phase_index=phase.index,
                        rank=rank,
                        quality=quality,
                        byte_size=len(blob),
                        path=rel.as_posix(),
                    )
                )

    entries.sort(key=lambda e: (e.phase_index, e.class_label, e.rank))
    totals = _compute_totals(budget, entries)
    _check_totals(budget, totals)
    manifest = BufferManifest(
        version=MANIFEST_VERSION,
        budget=budget,
        chosen_quality=quality,
        entries=entries,
        totals=totals,
        base_dir=out_dir,
    )
    _write_manifest(manifest, out_dir)
    return manifest


def _budget_from_dict(doc: Mapping) -> StorageBudget:
    scope = BudgetScope(doc["scope"])
    raw = doc["resolved_bytes"]
    resolved: dict[str | int, int] = {}
    for key, value in raw.items():
        resolved[int(key) if scope is BudgetScope.PER_PHASE else key] = int(value)
    return StorageBudget(
        scope=scope,
        equivalent_originals=int(doc["equivalent_originals"]),
        resolved_bytes=resolved,
    )


def load_buffer(manifest_path: str | Path) -> BufferManifest:
    """Load and verify a stored buffer.

    Checks the schema version, recomputes totals from the entries,
    verifies the budget is respected, requires gapless ranks 0..n-1 per
    class, and confirms every blob exists with the recorded size.  A
    size mismatch names the offending sample id.
    """
    manifest_path = Path(manifest_path)
    base_dir = manifest_path.parent
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BufferIntegrityError(f"{manifest_path}: not valid JSON ({exc})") from None
    if doc.get("version") != MANIFEST_VERSION:
        raise BufferIntegrityError(
            f"unsupported manifest version {doc.get('version')!r}"
        )
    try:
        budget = _budget_from_dict(doc["budget"])
        entries = [
            BufferEntry(
                id=e["id"],
                class_label=e["class"],
                phase_index=int(e["phase"]),
                rank=int(e["rank"]),
                quality=int(e["quality"]),
                byte_size=int(e["bytes"]),
                path=e["path"],
            )
            for e in doc["entries"]
        ]
        totals = {str(k): int(v) for k, v in doc["totals"].items()}
        chosen_quality = int(doc["chosen_quality"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BufferIntegrityError(f"{manifest_path}: bad manifest ({exc})") from None

    if _compute_totals(budget, entries) != totals:
        raise BufferIntegrityError("totals do not match the entry list")
    _check_totals(budget, totals)

    ranks: dict[str, list[int]] = {}
    for entry in entries:
        ranks.setdefault(entry.class_label, []).append(entry.rank)
    for label, got in ranks.items():
        if sorted(got) != list(range(len(got))):
            raise BufferIntegrityError(
                f"class {label!r}: ranks {sorted(got)} are not gapless from 0"
            )

    for entry in entries:
        blob = base_dir / entry.path
        if not blob.is_file():
            raise BufferIntegrityError(f"sample {entry.id!r}: blob {entry.path} missing")
        actual = blob.stat().st_size
        if actual != entry.byte_size:
            raise BufferIntegrityError(
                f"sample {entry.id!r}: blob is {actual} bytes, manifest says "
                f"{entry.byte_size}"
            )

    return BufferManifest(
        version=MANIFEST_VERSION,
        budget=budget,
        chosen_quality=chosen_quality,
        entries=entries,
        totals=totals,
        base_dir=base_dir,
    )


def shrink_buffer(manifest: BufferManifest, keep_per_class: int) -> BufferManifest:
    """Keep the ``keep_per_class`` lowest ranks of every class.

    Classes holding fewer entries than requested are left whole (the
    clamp shows up as an unchanged per-class count in the result).
    Totals are recomputed; the input manifest is not modified.
    """
    if keep_per_class < 0:
        raise ValueError("keep_per_class must be non-negative")
    kept = [e for e in manifest.entries if e.rank < keep_per_class]
    totals = _compute_totals(manifest.budget, kept)
    return BufferManifest(
        version=MANIFEST_VERSION,
        budget=manifest.budget,
        chosen_quality=manifest.chosen_quality,
        entries=kept,
        totals=totals,
        base_dir=manifest.base_dir,
    )


def shrink_buffer_dir(buffer_dir: str | Path, keep_per_class: int) -> BufferManifest:
    """In-place shrink: drop blobs past the kept prefix, rewrite the manifest."""
    buffer_dir = Path(buffer_dir)
    manifest = load_buffer(buffer_dir / MANIFEST_NAME)
    shrunk = shrink_buffer(manifest, keep_per_class)
    kept_paths = {e.path for e in shrunk.entries}
    for entry in manifest.entries:
        if entry.path not in kept_paths:
            (buffer_dir / entry.path).unlink(missing_ok=True)
    _write_manifest(shrunk, buffer_dir)
    return shrunk
