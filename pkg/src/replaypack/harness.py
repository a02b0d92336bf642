"""Desk-scale continual-learning benchmark on synthetic Gaussian classes.

The generator plants class means on a sphere, draws unit-variance
samples around them, and models compression as a per-sample feature
displacement that grows as quality drops:

    compressed(q) = f + noise_scale * (1 - q/100) ** noise_exponent * z

with z drawn once per sample and shared across qualities, so q = 100
reproduces the original features exactly and degradation is monotone.
Payload sizes are a flat 1000 bytes, compressed by the linear synthetic
size model.

The learner is a nearest-class-mean classifier over all classes seen so
far.  At each phase the means are recomputed from the current phase's
training features plus the replayed compressed features of old classes;
with an empty buffer an old class has no mean at all and its test
samples are necessarily missed, which is the catastrophic-forgetting
baseline replay is judged against.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .compression import (
    CompressorBackend,
    StorageBudget,
    SyntheticBackend,
    pack_phase,
)
from .features import (
    DatasetManifest,
    FeatureMatrix,
    PhaseSpec,
    SampleRecord,
    save_dataset_manifest,
    write_feature_matrix,
)
from .selection import ClassRanking, rank_classes
from .selector import (
    PhaseInputs,
    QualityCandidateSet,
    QualityDecision,
    decide_across_phases,
    evaluate_candidates,
)

PAYLOAD_BYTES = 1000
TEST_FRACTION = 0.2

# Fixed by the calibration sweep in tools/calibrate_synthetic.py; the
# regression tests pin the behaviour of exactly these defaults.
DEFAULT_DIM = 32
DEFAULT_CLASSES_PER_PHASE = 4
DEFAULT_PHASES = 5
DEFAULT_SAMPLES_PER_CLASS = 100
DEFAULT_CLUSTER_SPREAD = 2.5
DEFAULT_NOISE_SCALE = 8.0
DEFAULT_NOISE_EXPONENT = 4.0
DEFAULT_BUDGET_EQUIVALENTS = 4


@dataclass(frozen=True)
class SyntheticConfig:
    dim: int = DEFAULT_DIM
    classes_per_phase: int = DEFAULT_CLASSES_PER_PHASE
    phases: int = DEFAULT_PHASES
    samples_per_class: int = DEFAULT_SAMPLES_PER_CLASS
    cluster_spread: float = DEFAULT_CLUSTER_SPREAD
    noise_scale: float = DEFAULT_NOISE_SCALE
    noise_exponent: float = DEFAULT_NOISE_EXPONENT
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.dim, self.classes_per_phase, self.phases) < 1:
            raise ValueError("dim, classes_per_phase and phases must be positive")
        if self.samples_per_class < 5:
            raise ValueError("need at least 5 samples per class for a test split")
        if self.cluster_spread <= 0 or self.noise_scale < 0 or self.noise_exponent <= 0:
            raise ValueError("spread must be positive, noise non-negative")


@dataclass
class SyntheticDataset:
    """Generated benchmark: manifest + feature families + held-out test set."""

    config: SyntheticConfig
    manifest: DatasetManifest
    features: FeatureMatrix
    features_by_quality: dict[int, FeatureMatrix]
    test_features: FeatureMatrix
    test_labels: list[str]

    def train_ids_of_class(self, label: str) -> list[str]:
        return [rec.id for rec in self.manifest.samples_of_class(label)]


def _degraded(features: np.ndarray, z: np.ndarray, config: SyntheticConfig, quality: int) -> np.ndarray:
    scale = config.noise_scale * (1.0 - quality / 100.0) ** config.noise_exponent
    return features + scale * z


def generate_synthetic(
    config: SyntheticConfig, qualities: Sequence[int]
) -> SyntheticDataset:
    """Build the synthetic benchmark for the given candidate qualities.

    All randomness flows from one seeded generator in a fixed draw
    order, so equal configs produce bit-identical datasets.  Feature
    values are stored as float32, matching their on-disk precision, so
    in-memory runs and runs that round-trip through feature files agree
    exactly.
    """
    rng = np.random.default_rng(config.seed)
    n_classes = config.classes_per_phase * config.phases
    labels = [f"c{k:02d}" for k in range(n_classes)]

    means = rng.standard_normal((n_classes, config.dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    means *= config.cluster_spread

    spc = config.samples_per_class
    n_test = max(1, round(TEST_FRACTION * spc))
    raw = rng.standard_normal((n_classes, spc, config.dim))
    z = rng.standard_normal((n_classes, spc, config.dim))
    test_picks = [rng.permutation(spc)[:n_test] for _ in range(n_classes)]

    phases = [
        PhaseSpec(
            index=p,
            classes=tuple(labels[p * config.classes_per_phase : (p + 1) * config.classes_per_phase]),
        )
        for p in range(config.phases)
    ]

    train_ids: list[str] = []
    train_cols: list[np.ndarray] = []
    train_cols_q: dict[int, list[np.ndarray]] = {int(q): [] for q in qualities}
    test_ids: list[str] = []
    test_cols: list[np.ndarray] = []
    test_labels: list[str] = []
    samples: list[SampleRecord] = []

    for k, label in enumerate(labels):
        feats = means[k][None, :] + raw[k]
        is_test = np.zeros(spc, dtype=bool)
        is_test[test_picks[k]] = True
        phase_index = k // config.classes_per_phase
        for j in range(spc):
            sample_id = f"{label}-s{j:03d}"
            if is_test[j]:
                test_ids.append(sample_id)
                test_cols.append(feats[j])
                test_labels.append(label)
                continue
            train_ids.append(sample_id)
            train_cols.append(feats[j])
            for q in train_cols_q:
                train_cols_q[q].append(_degraded(feats[j], z[k, j], config, q))
            samples.append(
                SampleRecord(
                    id=sample_id,
                    class_label=label,
                    phase_index=phase_index,
                    payload_path=f"payloads/{sample_id}.bin",
                    original_byte_size=PAYLOAD_BYTES,
                )
            )

    def _matrix(cols: list[np.ndarray], ids: list[str]) -> FeatureMatrix:
        stacked = np.stack(cols, axis=1).astype(np.float32)
        return FeatureMatrix(stacked, ids)

    return SyntheticDataset(
        config=config,
        manifest=DatasetManifest(phases=phases, samples=samples),
        features=_matrix(train_cols, train_ids),
        features_by_quality={
            q: _matrix(cols, list(train_ids)) for q, cols in train_cols_q.items()
        },
        test_features=_matrix(test_cols, test_ids),
        test_labels=test_labels,
    )


@dataclass
class PhaseMetrics:
    """Accuracy trajectory of one continual run.

    ``per_task_accuracy[j]`` holds task j's test accuracy at every phase
    from its own onward; forgetting is final minus best, averaged over
    tasks, so it is never positive.
    """

    per_phase_accuracy: list[float]
    aic: float
    averaged_forgetting: float
    per_task_accuracy: list[list[float]]
    replay_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "per_phase_accuracy": self.per_phase_accuracy,
            "aic": self.aic,
            "averaged_forgetting": self.averaged_forgetting,
            "per_task_accuracy": self.per_task_accuracy,
            "replay_counts": self.replay_counts,
        }


def averaged_forgetting(per_task_accuracy: Sequence[Sequence[float]]) -> float:
    """Mean over tasks of (final accuracy - best accuracy); at most 0."""
    drops = []
    for history in per_task_accuracy:
        if not history:
            raise ValueError("every task needs at least one accuracy value")
        drops.append(history[-1] - max(history))
    if not drops:
        raise ValueError("need at least one task")
    return float(np.mean(drops))


def _phase_qualities(
    quality: int | Sequence[int] | None, phases: int
) -> list[int | None]:
    if quality is None:
        return [None] * phases
    if isinstance(quality, int):
        return [quality] * phases
    out = [int(q) for q in quality]
    if len(out) != phases:
        raise ValueError(f"need one quality per phase, got {len(out)} for {phases}")
    return out


def run_continual(
    dataset: SyntheticDataset,
    quality: int | Sequence[int] | None,
    budget: StorageBudget,
    backend: CompressorBackend | None = None,
) -> PhaseMetrics:
    """Play the phases in order with compressed replay at ``quality``.

    ``quality`` may be a single value, one value per phase, or None for
    the no-replay baseline.  Evaluation at phase t is single-head over
    every class seen so far, on held-out original-feature test samples.
    """
    backend = backend or SyntheticBackend()
    config = dataset.config
    samples = dataset.manifest.by_id()
    rankings = rank_classes(dataset.manifest, dataset.features)
    qualities = _phase_qualities(quality, config.phases)

    test_by_phase: dict[int, tuple[np.ndarray, list[str]]] = {}
    label_phase = {
        label: phase.index
        for phase in dataset.manifest.phases
        for label in phase.classes
    }
    test_values = dataset.test_features.values.astype(np.float64)
    for p in range(config.phases):
        cols = [
            j
            for j, label in enumerate(dataset.test_labels)
            if label_phase[label] == p
        ]
        test_by_phase[p] = (
            test_values[:, cols],
            [dataset.test_labels[j] for j in cols],
        )

    replay_means: dict[str, np.ndarray] = {}
    replay_counts: dict[str, int] = {}
    per_phase_accuracy: list[float] = []
    per_task_accuracy: list[list[float]] = [[] for _ in range(config.phases)]

    for t, phase in enumerate(dataset.manifest.phases):
        means: dict[str, np.ndarray] = dict(replay_means)
        for label in phase.classes:
            ids = dataset.train_ids_of_class(label)
            cols = dataset.features.restrict(ids).values.astype(np.float64)
            means[label] = cols.mean(axis=1)

        seen = [
            label
            for prior in dataset.manifest.phases[: t + 1]
            for label in prior.classes
        ]
        accuracies = []
        correct_total = 0
        count_total = 0
        for p in range(t + 1):
            values, truth = test_by_phase[p]
            correct = _nearest_mean_correct(means, seen, values, truth)
            accuracies.append(correct / len(truth))
            correct_total += correct
            count_total += len(truth)
        per_phase_accuracy.append(correct_total / count_total)
        for p in range(t + 1):
            per_task_accuracy[p].append(accuracies[p])

        # store this phase's replay exemplars for the phases after it
        q_t = qualities[t]
        if q_t is None:
            continue
        phase_rankings = [rankings[label] for label in phase.classes]
        per_class, _ = pack_phase(
            phase_rankings, samples, phase.index, q_t, budget, backend
        )
        if q_t == 100 or backend.lossless_features:
            stored_features = dataset.features
        else:
            try:
                stored_features = dataset.features_by_quality[q_t]
            except KeyError:
                raise ValueError(
                    f"dataset was not generated with quality {q_t}; "
                    f"available: {sorted(dataset.features_by_quality)}"
                ) from None
        for label, ids in per_class.items():
            if not ids:
                continue
            cols = stored_features.restrict(ids).values.astype(np.float64)
            replay_means[label] = cols.mean(axis=1)
            replay_counts[label] = len(ids)

    aic = float(np.mean(per_phase_accuracy))
    return PhaseMetrics(
        per_phase_accuracy=per_phase_accuracy,
        aic=aic,
        averaged_forgetting=averaged_forgetting(per_task_accuracy),
        per_task_accuracy=per_task_accuracy,
        replay_counts=dict(sorted(replay_counts.items())),
    )


def _nearest_mean_correct(
    means: Mapping[str, np.ndarray],
    seen: Sequence[str],
    values: np.ndarray,
    truth: Sequence[str],
) -> int:
    """Count nearest-mean hits; classes without a mean can never be predicted."""
    available = [label for label in seen if label in means]
    if not available:
        return 0
    centers = np.stack([means[label] for label in available], axis=1)
    # squared distance to every center, argmin per test column
    d2 = (
        (values * values).sum(axis=0)[:, None]
        - 2.0 * values.T @ centers
        + (centers * centers).sum(axis=0)[None, :]
    )
    picks = np.argmin(d2, axis=1)
    return int(sum(available[p] == t for p, t in zip(picks, truth)))


@dataclass
class GridRow:
    quality: int
    metrics: PhaseMetrics


@dataclass
class GridResult:
    best_quality: int
    rows: list[GridRow]


def grid_search(
    dataset: SyntheticDataset,
    qualities: Sequence[int],
    budget: StorageBudget,
    backend: CompressorBackend | None = None,
) -> GridResult:
    """Run the continual benchmark at every quality; best mean accuracy wins.

    Ties break toward the larger quality, mirroring the selector.
    """
    if not qualities:
        raise ValueError("need at least one quality")
    rows = [
        GridRow(quality=q, metrics=run_continual(dataset, q, budget, backend))
        for q in qualities
    ]
    best = max(rows, key=lambda row: (row.metrics.aic, row.quality))
    return GridResult(best_quality=best.quality, rows=rows)


def phase_inputs(dataset: SyntheticDataset) -> list[PhaseInputs]:
    """Selector inputs for every phase of a synthetic dataset."""
    rankings = rank_classes(dataset.manifest, dataset.features)
    samples = dataset.manifest.by_id()
    return [
        PhaseInputs(
            phase_index=phase.index,
            rankings=[rankings[label] for label in phase.classes],
            original_features=dataset.features,
            features_by_quality=dataset.features_by_quality,
            samples=samples,
        )
        for phase in dataset.manifest.phases
    ]


def select_for_dataset(
    dataset: SyntheticDataset,
    config: QualityCandidateSet,
    budget: StorageBudget,
    backend: CompressorBackend | None = None,
) -> QualityDecision:
    """Evaluate every phase and decide one quality across them."""
    backend = backend or SyntheticBackend()
    per_phase = [
        evaluate_candidates(inputs, config, budget, backend)
        for inputs in phase_inputs(dataset)
    ]
    return decide_across_phases(per_phase, config)


def export_dataset(dataset: SyntheticDataset, out_dir: str | Path) -> dict:
    """Write the dataset as manifest + feature files; returns a run config.

    The written tree is exactly what the file-based CLI commands consume,
    so exported fixtures exercise the same pipeline as in-memory runs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "dataset.json"
    save_dataset_manifest(dataset.manifest, manifest_path)
    original_path = out_dir / "features_original.fmx"
    write_feature_matrix(dataset.features, original_path)
    by_quality: dict[str, str] = {}
    for q in sorted(dataset.features_by_quality):
        path = out_dir / f"features_q{q:03d}.fmx"
        write_feature_matrix(dataset.features_by_quality[q], path)
        by_quality[str(q)] = path.name
    return {
        "manifest": manifest_path.name,
        "features": {"original": original_path.name, "by_quality": by_quality},
    }
