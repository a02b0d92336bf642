"""Buffer persistence: build, verify, tamper with, and shrink."""

import json

import numpy as np
import pytest

from replaypack import (
    BufferIntegrityError,
    DatasetManifest,
    FeatureMatrix,
    PhaseSpec,
    SampleRecord,
    StorageBudget,
    SyntheticBackend,
    build_buffer,
    load_buffer,
    shrink_buffer,
    shrink_buffer_dir,
)
from replaypack.buffer import MANIFEST_NAME, synthetic_payload
from replaypack.selection import rank_classes


def small_dataset(per_class=6, byte_size=100):
    phases = [PhaseSpec(0, ("ant", "bee")), PhaseSpec(1, ("cat",))]
    samples = []
    for label, phase in (("ant", 0), ("bee", 0), ("cat", 1)):
        for j in range(per_class):
            samples.append(
                SampleRecord(
                    id=f"{label}-{j}",
                    class_label=label,
                    phase_index=phase,
                    payload_path=f"payloads/{label}-{j}.bin",
                    original_byte_size=byte_size,
                )
            )
    manifest = DatasetManifest(phases=phases, samples=samples)
    rng = np.random.default_rng(17)
    ids = [rec.id for rec in samples]
    features = FeatureMatrix(
        rng.standard_normal((5, len(ids))).astype(np.float32), ids
    )
    return manifest, rank_classes(manifest, features)


def build_small(tmp_path, quality=50, k=2):
    manifest, rankings = small_dataset()
    budget = StorageBudget.resolve(manifest, k, "per_class")
    built = build_buffer(
        quality, manifest, rankings, SyntheticBackend(), budget, tmp_path / "buf"
    )
    return manifest, rankings, budget, built


def test_build_writes_blobs_and_manifest(tmp_path):
    manifest, rankings, budget, built = build_small(tmp_path)
    # 200-byte class budget, 50-byte blobs at q=50: 4 per class
    assert len(built.entries) == 12
    assert built.totals == {"ant": 200, "bee": 200, "cat": 200}
    for entry in built.entries:
        blob = tmp_path / "buf" / entry.path
        assert blob.is_file()
        assert blob.stat().st_size == entry.byte_size == 50
    ranks = [e.rank for e in built.entries_of_class("ant")]
    assert ranks == [0, 1, 2, 3]
    # entries are sorted by phase, class, rank
    keys = [(e.phase_index, e.class_label, e.rank) for e in built.entries]
    assert keys == sorted(keys)


def test_blob_content_is_compressed_payload(tmp_path):
    manifest, rankings, budget, built = build_small(tmp_path, quality=50)
    samples = manifest.by_id()
    entry = built.entries[0]
    blob = (tmp_path / "buf" / entry.path).read_bytes()
    assert blob == synthetic_payload(samples[entry.id])[:50]


def test_full_quality_blob_equals_payload(tmp_path):
    manifest, rankings, budget, built = build_small(tmp_path, quality=100, k=2)
    samples = manifest.by_id()
    entry = built.entries[0]
    blob = (tmp_path / "buf" / entry.path).read_bytes()
    assert blob == synthetic_payload(samples[entry.id])


def test_load_round_trip(tmp_path):
    _, _, _, built = build_small(tmp_path)
    loaded = load_buffer(tmp_path / "buf" / MANIFEST_NAME)
    assert loaded == built
    assert loaded.base_dir == tmp_path / "buf"


def test_rebuild_is_byte_identical(tmp_path):
    manifest, rankings = small_dataset()
    budget = StorageBudget.resolve(manifest, 2, "per_class")
    backend = SyntheticBackend()
    build_buffer(50, manifest, rankings, backend, budget, tmp_path / "one")
    build_buffer(50, manifest, rankings, backend, budget, tmp_path / "two")
    first = (tmp_path / "one" / MANIFEST_NAME).read_bytes()
    second = (tmp_path / "two" / MANIFEST_NAME).read_bytes()
    assert first == second


def test_load_rejects_size_tamper(tmp_path):
    _, _, _, built = build_small(tmp_path)
    victim = built.entries[3]
    blob = tmp_path / "buf" / victim.path
    blob.write_bytes(blob.read_bytes() + b"x")
    with pytest.raises(BufferIntegrityError, match=victim.id):
        load_buffer(tmp_path / "buf" / MANIFEST_NAME)


def test_load_rejects_missing_blob(tmp_path):
    _, _, _, built = build_small(tmp_path)
    victim = built.entries[0]
    (tmp_path / "buf" / victim.path).unlink()
    with pytest.raises(BufferIntegrityError, match="missing"):
        load_buffer(tmp_path / "buf" / MANIFEST_NAME)


def _edit_manifest(tmp_path, mutate):
    path = tmp_path / "buf" / MANIFEST_NAME
    doc = json.loads(path.read_text())
    mutate(doc)
    path.write_text(json.dumps(doc))
    return path


def test_load_rejects_totals_tamper(tmp_path):
    build_small(tmp_path)
    path = _edit_manifest(tmp_path, lambda d: d["totals"].update(ant=150))
    with pytest.raises(BufferIntegrityError, match="totals"):
        load_buffer(path)


def test_load_rejects_version_bump(tmp_path):
    build_small(tmp_path)
    path = _edit_manifest(tmp_path, lambda d: d.update(version=2))
    with pytest.raises(BufferIntegrityError, match="version"):
        load_buffer(path)


def test_load_rejects_rank_gap(tmp_path):
    def drop_rank_zero(doc):
        victim = next(e for e in doc["entries"] if e["class"] == "ant" and e["rank"] == 0)
        doc["entries"].remove(victim)
        doc["totals"]["ant"] -= victim["bytes"]

    build_small(tmp_path)
    path = _edit_manifest(tmp_path, drop_rank_zero)
    with pytest.raises(BufferIntegrityError, match="gapless"):
        load_buffer(path)


def test_load_rejects_budget_overflow(tmp_path):
    def shrink_budget(doc):
        doc["budget"]["resolved_bytes"]["ant"] = 10

    build_small(tmp_path)
    path = _edit_manifest(tmp_path, shrink_budget)
    with pytest.raises(BufferIntegrityError, match="exceed"):
        load_buffer(path)


def test_load_rejects_garbage_json(tmp_path):
    build_small(tmp_path)
    path = tmp_path / "buf" / MANIFEST_NAME
    path.write_text("{]")
    with pytest.raises(BufferIntegrityError):
        load_buffer(path)


def test_shrink_keeps_lowest_ranks(tmp_path):
    _, _, _, built = build_small(tmp_path)
    shrunk = shrink_buffer(built, 2)
    assert {e.class_label for e in shrunk.entries} == {"ant", "bee", "cat"}
    for label in ("ant", "bee", "cat"):
        ranks = [e.rank for e in shrunk.entries if e.class_label == label]
        assert ranks == [0, 1]
    assert shrunk.totals == {"ant": 100, "bee": 100, "cat": 100}
    # original untouched
    assert len(built.entries) == 12


def test_shrink_clamps_and_zeroes(tmp_path):
    _, _, _, built = build_small(tmp_path)
    same = shrink_buffer(built, 99)
    assert len(same.entries) == len(built.entries)
    empty = shrink_buffer(built, 0)
    assert empty.entries == [] and empty.totals == {}
    with pytest.raises(ValueError):
        shrink_buffer(built, -1)


def test_shrink_dir_removes_blobs(tmp_path):
    _, _, _, built = build_small(tmp_path)
    shrunk = shrink_buffer_dir(tmp_path / "buf", 1)
    assert len(shrunk.entries) == 3
    remaining = sorted(p for p in (tmp_path / "buf").rglob("*.bin"))
    assert len(remaining) == 3
    # the rewritten manifest still verifies
    reloaded = load_buffer(tmp_path / "buf" / MANIFEST_NAME)
    assert reloaded == shrunk


def test_shrink_fraction_uniform_blobs(tmp_path):
    """85 equal-size blobs cut to 40 keep 40/85 of the stored bytes."""
    phases = [PhaseSpec(0, ("u",))]
    samples = [
        SampleRecord(f"u-{j:03d}", "u", 0, f"payloads/u-{j:03d}.bin", 1000)
        for j in range(85)
    ]
    manifest = DatasetManifest(phases=phases, samples=samples)
    rng = np.random.default_rng(0)
    features = FeatureMatrix(
        rng.standard_normal((4, 85)).astype(np.float32),
        [rec.id for rec in samples],
    )
    rankings = rank_classes(manifest, features)
    budget = StorageBudget.resolve(manifest, 43, "per_class")
    built = build_buffer(
        50, manifest, rankings, SyntheticBackend(), budget, tmp_path / "wide"
    )
    assert len(built.entries) == 85
    before = sum(built.totals.values())
    shrunk = shrink_buffer_dir(tmp_path / "wide", 40)
    after = sum(shrunk.totals.values())
    assert after / before == pytest.approx(40 / 85, abs=1e-12)
