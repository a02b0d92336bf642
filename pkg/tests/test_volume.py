"""Gram volumes against a pure-Python determinant oracle, plus ratio behaviour.

The oracle below computes det(M^T M) by cofactor expansion on plain
Python floats, with Gram entries accumulated by explicit loops.  It
shares no linear algebra with the implementation under test.
"""

import numpy as np
import pytest

from replaypack import (
    AlignmentError,
    FeatureMatrix,
    NearSingularError,
    RankDeficientError,
    ZeroColumnError,
    log_volume,
    normalize_columns,
    phase_ratio,
    averaged_ratio,
    volume_ratio,
)
from replaypack.volume import JITTER_LADDER, VolumeReport


def gram_det_oracle(values):
    """det of the Gram matrix, cofactor expansion on Python floats."""
    dim, count = values.shape
    gram = [
        [sum(float(values[r, i]) * float(values[r, j]) for r in range(dim)) for j in range(count)]
        for i in range(count)
    ]
    return _det(gram)


def _det(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    total = 0.0
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in m[1:]]
        sign = -1.0 if j % 2 else 1.0
        total += sign * m[0][j] * _det(minor)
    return total


def unit_columns(rng, dim, count):
    values = rng.standard_normal((dim, count))
    values /= np.linalg.norm(values, axis=0)
    return FeatureMatrix(values, [f"u{j}" for j in range(count)])


def test_two_column_hand_value():
    """Unit columns with dot 0.6: squared volume 0.64, log volume ln(0.8)."""
    values = np.array([[1.0, 0.6], [0.0, 0.8]])
    matrix = FeatureMatrix(values, ["p", "q"])
    expected = 0.5 * np.log(0.64)
    assert log_volume(matrix) == pytest.approx(expected, abs=1e-12)
    assert log_volume(matrix) == pytest.approx(-0.2231435513, abs=1e-9)


def test_single_column_volume_is_zero():
    matrix = FeatureMatrix(np.array([[0.0], [1.0]]), ["only"])
    assert log_volume(matrix) == 0.0


def test_orthonormal_volume_is_zero():
    matrix = FeatureMatrix(np.eye(4), [f"e{j}" for j in range(4)])
    assert log_volume(matrix) == pytest.approx(0.0, abs=1e-12)


def test_log_volume_matches_oracle_seeded():
    rng = np.random.default_rng(99)
    for _ in range(60):
        dim = int(rng.integers(1, 9))
        count = int(rng.integers(1, min(dim, 6) + 1))
        matrix = unit_columns(rng, dim, count)
        got = np.exp(2.0 * log_volume(matrix))
        want = gram_det_oracle(matrix.values)
        assert got == pytest.approx(want, rel=1e-8)


def test_ratio_hand_value():
    """Orthonormal pair over a 0.6-dot pair: 1 / 0.8 = 1.25."""
    original = FeatureMatrix(np.array([[1.0, 0.6], [0.0, 0.8]]), ["p", "q"])
    compressed = FeatureMatrix(np.eye(2), ["p", "q"])
    report = volume_ratio(compressed, original, quality=50)
    assert report.ratio == pytest.approx(1.25, rel=1e-12)
    assert report.log_ratio == pytest.approx(np.log(1.25), rel=1e-12)
    assert report.n == 2
    assert report.quality == 50


def test_identical_inputs_give_exact_one():
    rng = np.random.default_rng(5)
    matrix = unit_columns(rng, 6, 4)
    twin = FeatureMatrix(matrix.values.copy(), list(matrix.sample_ids))
    report = volume_ratio(matrix, twin)
    assert report.ratio == 1.0
    assert report.log_ratio == 0.0


def test_duplicate_columns_escalate_jitter_jointly():
    # an exactly repeated column makes the Gram singular at zero jitter
    col = np.array([0.6, 0.8])
    values = np.stack([col, col], axis=1)
    matrix = FeatureMatrix(values, ["one", "two"])
    twin = FeatureMatrix(values.copy(), ["one", "two"])
    report = volume_ratio(matrix, twin)
    assert report.jitter > 0.0
    assert report.ratio == 1.0


def test_rotation_invariance():
    rng = np.random.default_rng(21)
    original = unit_columns(rng, 8, 5)
    compressed = unit_columns(rng, 8, 5)
    compressed = FeatureMatrix(compressed.values, list(original.sample_ids))
    base = volume_ratio(compressed, original)
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    rotated = volume_ratio(
        FeatureMatrix(q @ compressed.values, list(original.sample_ids)),
        FeatureMatrix(q @ original.values, list(original.sample_ids)),
    )
    assert rotated.ratio == pytest.approx(base.ratio, rel=1e-9)


def test_column_permutation_invariance():
    rng = np.random.default_rng(22)
    original = unit_columns(rng, 7, 4)
    compressed = FeatureMatrix(
        unit_columns(rng, 7, 4).values, list(original.sample_ids)
    )
    base = volume_ratio(compressed, original)
    perm = [2, 0, 3, 1]
    ids = [original.sample_ids[j] for j in perm]
    shuffled = volume_ratio(
        FeatureMatrix(compressed.values[:, perm], ids),
        FeatureMatrix(original.values[:, perm], ids),
    )
    assert shuffled.ratio == pytest.approx(base.ratio, rel=1e-9)


def test_more_columns_than_dims_rejected():
    wide = FeatureMatrix(
        np.array([[1.0, 0.0, 0.6], [0.0, 1.0, 0.8]]), ["a", "b", "c"]
    )
    with pytest.raises(RankDeficientError):
        log_volume(wide)
    with pytest.raises(RankDeficientError, match="compressed"):
        volume_ratio(wide, wide)


def test_normalize_columns_zero_column_names_sample():
    values = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ZeroColumnError, match="dead"):
        normalize_columns(FeatureMatrix(values, ["live", "dead"]))


def test_normalize_columns_unit_norms():
    rng = np.random.default_rng(8)
    matrix = FeatureMatrix(rng.standard_normal((5, 7)), [f"n{j}" for j in range(7)])
    unit = normalize_columns(matrix)
    norms = np.linalg.norm(unit.values, axis=0)
    assert norms == pytest.approx(np.ones(7), abs=1e-12)


def test_unnormalized_input_rejected():
    matrix = FeatureMatrix(np.array([[2.0], [0.0]]), ["big"])
    with pytest.raises(ValueError, match="normalize"):
        log_volume(matrix)


def test_misaligned_ids_rejected():
    rng = np.random.default_rng(6)
    a = unit_columns(rng, 4, 3)
    b = FeatureMatrix(a.values.copy(), ["x0", "x1", "x2"])
    with pytest.raises(AlignmentError):
        volume_ratio(a, b)
    shorter = FeatureMatrix(a.values[:, :2], a.sample_ids[:2])
    with pytest.raises(AlignmentError):
        volume_ratio(shorter, a)


def test_near_singular_error_carries_ladder(monkeypatch):
    def always_fails(_):
        raise np.linalg.LinAlgError("forced")

    monkeypatch.setattr(np.linalg, "cholesky", always_fails)
    matrix = FeatureMatrix(np.eye(2), ["a", "b"])
    with pytest.raises(NearSingularError) as info:
        log_volume(matrix)
    assert info.value.jitters == JITTER_LADDER
    with pytest.raises(NearSingularError):
        volume_ratio(matrix, matrix)


def _report(ratio, quality=50, n=3):
    log_ratio = float(np.log(ratio))
    return VolumeReport(
        quality=quality,
        n=n,
        log_vol_original=-1.0,
        log_vol_compressed=-1.0 + log_ratio,
        log_ratio=log_ratio,
        ratio=ratio,
    )


def test_phase_ratio_is_geometric_mean():
    merged = phase_ratio([_report(1.2), _report(0.8)])
    assert merged.ratio == pytest.approx(np.sqrt(1.2 * 0.8), rel=1e-12)
    assert merged.n == 6
    assert merged.per_class is not None and len(merged.per_class) == 2


def test_phase_ratio_rejects_mixed_or_empty():
    with pytest.raises(ValueError):
        phase_ratio([])
    with pytest.raises(ValueError, match="mixed"):
        phase_ratio([_report(1.0, quality=10), _report(1.0, quality=90)])


def test_phase_ratio_propagates_flags():
    worse = _report(1.1)
    worse.jitter = 1e-10
    worse.truncated = True
    merged = phase_ratio([_report(1.0), worse])
    assert merged.jitter == 1e-10
    assert merged.truncated is True


def test_averaged_ratio_hand_value():
    # phase ratios 1.2 and 1.4 average to 1.3
    assert averaged_ratio([_report(1.2), _report(1.4)]) == pytest.approx(1.3, rel=1e-12)
    with pytest.raises(ValueError):
        averaged_ratio([])


def test_report_serialization_keys():
    report = _report(1.5)
    report.class_label = "cat"
    doc = report.to_dict()
    assert doc["class"] == "cat"
    assert doc["ratio"] == 1.5
    assert "per_class" not in doc
    merged = phase_ratio([_report(1.0), _report(1.0)]).to_dict()
    assert len(merged["per_class"]) == 2
