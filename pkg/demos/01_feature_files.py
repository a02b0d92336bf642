"""Feature files and dataset manifests: the on-disk contracts.

Builds a tiny feature matrix, writes it next to a dataset manifest, and
reads both back to show the round trip is bit-exact.
"""

import tempfile
from pathlib import Path

import numpy as np

from replaypack import (
    DatasetManifest,
    FeatureMatrix,
    PhaseSpec,
    SampleRecord,
    load_dataset_manifest,
    read_feature_matrix,
    save_dataset_manifest,
    write_feature_matrix,
)

work = Path(tempfile.mkdtemp(prefix="replaypack-demo-"))

# three samples of a single "flowers" class, 4-dimensional features
rng = np.random.default_rng(0)
values = rng.standard_normal((4, 3)).astype(np.float32)
matrix = FeatureMatrix(values, ["rose-0", "rose-1", "rose-2"])

feature_path = work / "flowers.fmx"
write_feature_matrix(matrix, feature_path)
print(f"wrote {feature_path} ({feature_path.stat().st_size} bytes)")
print(f"sidecar ids: {(work / 'flowers.fmx.ids.json').read_text()}")

back = read_feature_matrix(feature_path)
print(f"round trip bit-exact: {np.array_equal(back.values, matrix.values)}")
print(f"column for rose-1: {back.column('rose-1')}")

# the manifest ties samples to classes, phases, and payload files
manifest = DatasetManifest(
    phases=[PhaseSpec(index=0, classes=("rose",))],
    samples=[
        SampleRecord(
            id=f"rose-{j}",
            class_label="rose",
            phase_index=0,
            payload_path=f"payloads/rose-{j}.jpg",
            original_byte_size=48_000 + 100 * j,
        )
        for j in range(3)
    ],
)
manifest_path = work / "dataset.json"
save_dataset_manifest(manifest, manifest_path)
reloaded = load_dataset_manifest(manifest_path)
print(f"manifest classes: {reloaded.classes()}")
print(f"samples of rose: {[rec.id for rec in reloaded.samples_of_class('rose')]}")
print(f"demo files under {work}")
