"""Shared fixtures: the calibrated synthetic benchmark and the toy corpus."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from replaypack import (
    DEFAULT_CANDIDATES,
    DatasetManifest,
    FeatureMatrix,
    PhaseSpec,
    SampleRecord,
    StorageBudget,
    SyntheticConfig,
    generate_synthetic,
    rank_by_mean_of_feature,
)
from replaypack.harness import DEFAULT_BUDGET_EQUIVALENTS

DATA_DIR = Path(__file__).parent / "data"
TOY_CORPUS = DATA_DIR / "toy_corpus"
GOLDEN_DIR = DATA_DIR / "golden"


@pytest.fixture(scope="session")
def synthetic_seed7():
    """The calibrated benchmark fixture behind the golden CLI answer."""
    config = SyntheticConfig(seed=7)
    return generate_synthetic(config, DEFAULT_CANDIDATES)


@pytest.fixture(scope="session")
def seed7_budget(synthetic_seed7):
    return StorageBudget.resolve(
        synthetic_seed7.manifest, DEFAULT_BUDGET_EQUIVALENTS, "per_class"
    )


def toy_corpus_manifest() -> DatasetManifest:
    """Manifest over the checked-in JPEG corpus: one class, one phase."""
    paths = sorted(TOY_CORPUS.glob("img*.jpg"))
    assert len(paths) == 100, "toy corpus must hold exactly 100 images"
    samples = [
        SampleRecord(
            id=path.stem,
            class_label="scene",
            phase_index=0,
            payload_path=str(path),
            original_byte_size=path.stat().st_size,
        )
        for path in paths
    ]
    return DatasetManifest(
        phases=[PhaseSpec(index=0, classes=("scene",))], samples=samples
    )


def toy_corpus_features(manifest: DatasetManifest) -> FeatureMatrix:
    """8x8 grayscale thumbnails as feature vectors, one column per image."""
    from PIL import Image

    cols = []
    ids = []
    for rec in manifest.samples:
        with Image.open(rec.payload_path) as img:
            thumb = img.convert("L").resize((8, 8), Image.BILINEAR)
        cols.append(np.asarray(thumb, dtype=np.float32).reshape(-1))
        ids.append(rec.id)
    return FeatureMatrix(np.stack(cols, axis=1), ids)


def toy_corpus_ranking(manifest: DatasetManifest):
    return rank_by_mean_of_feature(toy_corpus_features(manifest), "scene")
