"""Feature-matrix and dataset-manifest I/O.

Feature files use a small binary container: a 12-byte header (ASCII magic
``FMX1``, u32 little-endian dim, u32 little-endian count) followed by
``dim * count`` float32 little-endian values in column-major order, one
column per sample.  Sample ids live in a JSON sidecar at
``<path>.ids.json`` holding an array of strings, one per column.

Dataset manifests are JSON documents::

    {"phases":  [{"index": 0, "classes": ["cat", "dog"]}, ...],
     "samples": [{"id": "cat-001", "class": "cat", "phase": 0,
                  "payload": "raw/cat-001.jpg", "bytes": 48213}, ...]}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BodySizeError,
    MalformedHeaderError,
    ManifestError,
    NonFiniteValueError,
    SidecarError,
)

MAGIC = b"FMX1"
_HEADER = struct.Struct("<4sII")


@dataclass(eq=False)
class FeatureMatrix:
    """A dim x count matrix of feature vectors, one column per sample.

    Values are float32 on disk; in memory they may be float32 (fresh from
    a file) or float64 (after normalization).  Invariants checked on
    construction: two-dimensional values, positive dim, one id per column,
    pairwise-distinct ids, finite values.
    """

    values: np.ndarray
    sample_ids: list[str]
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        self.sample_ids = list(self.sample_ids)
        self.validate()
        self._index = {s: j for j, s in enumerate(self.sample_ids)}

    def validate(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        if not np.issubdtype(self.values.dtype, np.floating):
            raise ValueError(f"values must be floating point, got {self.values.dtype}")
        dim, count = self.values.shape
        if dim < 1:
            raise ValueError("dim must be positive")
        if len(self.sample_ids) != count:
            raise ValueError(
                f"{len(self.sample_ids)} sample ids for {count} columns"
            )
        if len(set(self.sample_ids)) != count:
            raise ValueError("sample ids must be pairwise distinct")
        if count and not np.isfinite(self.values).all():
            bad = int(np.flatnonzero(~np.isfinite(self.values).all(axis=0))[0])
            raise ValueError(f"non-finite value in column {bad}")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def count(self) -> int:
        return int(self.values.shape[1])

    def column(self, sample_id: str) -> np.ndarray:
        return self.values[:, self._index[sample_id]]

    def restrict(self, ids: Sequence[str]) -> "FeatureMatrix":
        """Columns for ``ids``, in the order given."""
        try:
            cols = [self._index[s] for s in ids]
        except KeyError as exc:
            raise KeyError(f"unknown sample id {exc.args[0]!r}") from None
        return FeatureMatrix(self.values[:, cols], list(ids))


def write_feature_matrix(matrix: FeatureMatrix, path: str | Path) -> None:
    """Write ``matrix`` to ``path`` plus an id sidecar at ``<path>.ids.json``.

    Values are stored as little-endian float32 in column-major order, so
    a float32 matrix round-trips bit-exactly.
    """
    matrix.validate()
    path = Path(path)
    body = np.ascontiguousarray(matrix.values.T, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, matrix.dim, matrix.count))
        fh.write(body)
    sidecar = path.with_name(path.name + ".ids.json")
    sidecar.write_text(json.dumps(matrix.sample_ids), encoding="utf-8")


def read_feature_matrix(path: str | Path) -> FeatureMatrix:
    """Read a feature file written by :func:`write_feature_matrix`.

    Rejects anything the writer cannot produce: bad magic or truncated
    header (:class:`MalformedHeaderError`), a body whose byte count does
    not match the declared dim*count (:class:`BodySizeError`), non-finite
    values (:class:`NonFiniteValueError`), and a sidecar whose ids do not
    line up one per column (:class:`SidecarError`).
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise MalformedHeaderError(f"{path}: file shorter than the 12-byte header")
    magic, dim, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {magic!r}")
    if dim == 0:
        raise MalformedHeaderError(f"{path}: header declares dim = 0")
    body = raw[_HEADER.size :]
    expected = dim * count * 4
    if len(body) != expected:
        raise BodySizeError(
            f"{path}: header declares {dim}x{count} ({expected} body bytes), "
            f"found {len(body)}"
        )
    values = np.frombuffer(body, dtype="<f4").reshape((dim, count), order="F")
    if count:
        finite = np.isfinite(values).all(axis=0)
        if not finite.all():
            j = int(np.flatnonzero(~finite)[0])
            raise NonFiniteValueError(f"{path}: non-finite value in column {j}")

    sidecar = path.with_name(path.name + ".ids.json")
    try:
        ids = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SidecarError(f"{sidecar}: not valid JSON ({exc})") from None
    if not isinstance(ids, list) or not all(isinstance(s, str) for s in ids):
        raise SidecarError(f"{sidecar}: expected a JSON array of strings")
    if len(ids) != count:
        raise SidecarError(
            f"{sidecar}: {len(ids)} ids for {count} columns"
        )
    if len(set(ids)) != len(ids):
        raise SidecarError(f"{sidecar}: sample ids repeat")
    # frombuffer views are read-only; own the data
    return FeatureMatrix(values.copy(), ids)


@dataclass(frozen=True)
class SampleRecord:
    """One sample: identity, label, phase, payload location and size.

    ``original_byte_size`` matches the on-disk size of ``payload_path``
    whenever that file exists; synthetic datasets reference payloads that
    are never materialized.
    """

    id: str
    class_label: str
    phase_index: int
    payload_path: str
    original_byte_size: int


@dataclass(frozen=True)
class PhaseSpec:
    index: int
    classes: tuple[str, ...]


@dataclass
class DatasetManifest:
    """Phases plus the full sample roster for one incremental dataset."""

    phases: list[PhaseSpec]
    samples: list[SampleRecord]

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        seen_phase: dict[int, PhaseSpec] = {}
        class_home: dict[str, int] = {}
        for phase in self.phases:
            if phase.index in seen_phase:
                raise ManifestError(f"phase index {phase.index} repeats")
            seen_phase[phase.index] = phase
            for label in phase.classes:
                if label in class_home:
                    raise ManifestError(
                        f"class {label!r} assigned to phases "
                        f"{class_home[label]} and {phase.index}"
                    )
                class_home[label] = phase.index
        ids: set[str] = set()
        for rec in self.samples:
            if rec.id in ids:
                raise ManifestError(f"duplicate sample id {rec.id!r}")
            ids.add(rec.id)
            if rec.class_label not in class_home:
                raise ManifestError(
                    f"sample {rec.id!r} has class {rec.class_label!r} "
                    "not listed in any phase"
                )
            if class_home[rec.class_label] != rec.phase_index:
                raise ManifestError(
                    f"sample {rec.id!r} claims phase {rec.phase_index} but its "
                    f"class lives in phase {class_home[rec.class_label]}"
                )
            if rec.original_byte_size < 1:
                raise ManifestError(
                    f"sample {rec.id!r} has non-positive byte size"
                )

    def by_id(self) -> dict[str, SampleRecord]:
        return {rec.id: rec for rec in self.samples}

    def classes(self) -> list[str]:
        out: list[str] = []
        for phase in self.phases:
            out.extend(phase.classes)
        return out

    def samples_of_class(self, label: str) -> list[SampleRecord]:
        return [rec for rec in self.samples if rec.class_label == label]

    def samples_of_phase(self, index: int) -> list[SampleRecord]:
        return [rec for rec in self.samples if rec.phase_index == index]


def load_dataset_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a dataset manifest JSON file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from None
    return dataset_manifest_from_dict(doc, origin=str(path))


def dataset_manifest_from_dict(doc: object, origin: str = "<dict>") -> DatasetManifest:
    if not isinstance(doc, Mapping):
        raise ManifestError(f"{origin}: manifest must be a JSON object")
    for key in ("phases", "samples"):
        if key not in doc or not isinstance(doc[key], list):
            raise ManifestError(f"{origin}: missing or non-array {key!r}")
    phases = []
    for entry in doc["phases"]:
        try:
            phases.append(
                PhaseSpec(
                    index=_as_int(entry["index"]),
                    classes=tuple(_as_str(c) for c in entry["classes"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{origin}: bad phase entry {entry!r} ({exc})") from None
    samples = []
    for entry in doc["samples"]:
        try:
            samples.append(
                SampleRecord(
                    id=_as_str(entry["id"]),
                    class_label=_as_str(entry["class"]),
                    phase_index=_as_int(entry["phase"]),
                    payload_path=_as_str(entry["payload"]),
                    original_byte_size=_as_int(entry["bytes"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{origin}: bad sample entry {entry!r} ({exc})") from None
    return DatasetManifest(phases=phases, samples=samples)


def save_dataset_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    manifest.validate()
    doc = {
        "phases": [
            {"index": p.index, "classes": list(p.classes)} for p in manifest.phases
        ],
        "samples": [
            {
                "id": rec.id,
                "class": rec.class_label,
                "phase": rec.phase_index,
                "payload": rec.payload_path,
                "bytes": rec.original_byte_size,
            }
            for rec in manifest.samples
        ],
    }
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _as_int(value: object) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected integer, got {value!r}")
    return value


def _as_str(value: object) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected string, got {value!r}")
    return value
