"""Exemplar ranking: nearest-to-class-mean first.

Distances are computed against the mean of the raw (unnormalized)
features, so the ranking is independent of any later column scaling.
The ranking is computed once per class; every smaller exemplar set is a
prefix of it, which is what makes budget packing a pure prefix walk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClassError
from .features import DatasetManifest, FeatureMatrix


@dataclass
class ClassRanking:
    """Sample ids of one class, closest to the class mean first."""

    class_label: str
    ranked_ids: list[str]
    distances: list[float]

    def __post_init__(self) -> None:
        if len(self.ranked_ids) != len(self.distances):
            raise ValueError("one distance per ranked id")
        if any(b < a for a, b in zip(self.distances, self.distances[1:])):
            raise ValueError("distances must be non-decreasing")


def class_mean(features: FeatureMatrix) -> np.ndarray:
    """Mean feature vector over the columns of ``features``."""
    if features.count == 0:
        raise EmptyClassError("cannot take the mean of zero samples")
    return features.values.astype(np.float64).mean(axis=1)


def rank_by_mean_of_feature(features: FeatureMatrix, class_label: str) -> ClassRanking:
    """Rank one class's samples by ascending distance to the class mean.

    Ties in distance break by ascending sample id, so the ranking is a
    total order and deterministic.
    """
    mean = class_mean(features)
    deltas = features.values.astype(np.float64) - mean[:, None]
    dists = np.sqrt((deltas * deltas).sum(axis=0))
    order = sorted(zip(dists.tolist(), features.sample_ids))
    return ClassRanking(
        class_label=class_label,
        ranked_ids=[s for _, s in order],
        distances=[d for d, _ in order],
    )


def rank_classes(
    manifest: DatasetManifest, features: FeatureMatrix
) -> dict[str, ClassRanking]:
    """Rank every class in the manifest, keyed by class label.

    ``features`` must carry a column for every manifest sample.
    """
    out: dict[str, ClassRanking] = {}
    for label in sorted(manifest.classes()):
        ids = [rec.id for rec in manifest.samples_of_class(label)]
        if not ids:
            raise EmptyClassError(f"class {label!r} has no samples")
        out[label] = rank_by_mean_of_feature(features.restrict(ids), label)
    return out
