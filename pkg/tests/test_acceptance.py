"""Acceptance suite: one test per shipped guarantee, with runtime caps.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the
PASS lines).  Every test prints one line naming its criterion, so the
suite reads as a checklist.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from replaypack import (
    DatasetManifest,
    FeatureMatrix,
    IdentityBackend,
    JpegBackend,
    PhaseSpec,
    QualityCandidateSet,
    SampleRecord,
    StorageBudget,
    SyntheticBackend,
    SyntheticConfig,
    build_buffer,
    export_dataset,
    generate_synthetic,
    grid_search,
    log_volume,
    pack_for_quality,
    quantity_curve,
    run_continual,
    select_for_dataset,
    select_quality,
    shrink_buffer_dir,
)
from replaypack.cli import main
from replaypack.compression import linear_size
from replaypack.harness import DEFAULT_BUDGET_EQUIVALENTS, phase_inputs
from replaypack.selection import rank_classes
from replaypack.selector import DEFAULT_CANDIDATES, evaluate_candidates

from conftest import toy_corpus_manifest, toy_corpus_ranking

Q = DEFAULT_CANDIDATES
SEEDS = (0, 1, 2, 3, 4)


@contextmanager
def capped(seconds):
    start = time.monotonic()
    yield
    elapsed = time.monotonic() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, cap is {seconds}s"


def announce(tag, detail):
    print(f"ACCEPTANCE {tag}: PASS ({detail})")


# --- criterion 1: log-volume against an independent determinant oracle ---


def _det(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    total = 0.0
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in m[1:]]
        total += (-1.0 if j % 2 else 1.0) * m[0][j] * _det(minor)
    return total


def _gram_det(values):
    dim, count = values.shape
    gram = [
        [
            sum(float(values[r, i]) * float(values[r, j]) for r in range(dim))
            for j in range(count)
        ]
        for i in range(count)
    ]
    return _det(gram)


def test_volume_oracle_200_matrices():
    """Squared volume equals the cofactor-expansion Gram determinant."""
    rng = np.random.default_rng(1001)
    with capped(5.0):
        worst = 0.0
        for _ in range(200):
            dim = int(rng.integers(1, 9))
            count = int(rng.integers(1, min(dim, 6) + 1))
            values = rng.standard_normal((dim, count))
            values /= np.linalg.norm(values, axis=0)
            matrix = FeatureMatrix(values, [f"v{j}" for j in range(count)])
            got = float(np.exp(2.0 * log_volume(matrix)))
            want = _gram_det(values)
            rel = abs(got - want) / abs(want)
            worst = max(worst, rel)
            assert rel <= 1e-8
    announce("volume-oracle", f"200 matrices, worst rel err {worst:.2e}")


# --- criterion 2: identity backend is a fixed point of the selector ---


def test_identity_backend_selects_lowest_quality():
    dataset = generate_synthetic(SyntheticConfig(seed=0), Q)
    budget = StorageBudget.resolve(
        dataset.manifest, DEFAULT_BUDGET_EQUIVALENTS, "per_class"
    )
    config = QualityCandidateSet(Q, 0.5)
    backend = IdentityBackend()
    with capped(1.0):
        reports = [
            evaluate_candidates(inputs, config, budget, backend)
            for inputs in phase_inputs(dataset)
        ]
        for phase in reports:
            for report in phase:
                assert abs(report.ratio - 1.0) <= 1e-12
        decision = select_quality(reports[0], config)
    assert decision.chosen_quality == min(Q)
    assert not decision.fallback_used
    announce("identity-fixed-point", f"all ratios 1.0, chose q={min(Q)}")


# --- criterion 3: greedy packing equals brute force, counts monotone ---


def test_packing_oracle_1000_instances():
    rng = np.random.default_rng(777)
    with capped(5.0):
        for _ in range(1000):
            count = int(rng.integers(0, 21))
            originals = [int(s) for s in rng.integers(1, 2000, size=count)]
            budget = int(rng.integers(0, 20000))
            ids = [f"s{j}" for j in range(count)]
            prev = None
            for quality in Q:
                sizes = [linear_size(s0, quality) for s0 in originals]
                table = dict(zip(ids, sizes))
                result = pack_for_quality(ids, quality, budget, table.__getitem__)
                best = 0
                for k in range(count + 1):
                    if sum(sizes[:k]) <= budget:
                        best = k
                assert result.n_q_mb == best
                assert result.bytes_used == sum(sizes[:best])
                if prev is not None:
                    assert result.n_q_mb <= prev
                prev = result.n_q_mb
    announce("packing-oracle", "1000 instances match brute force, counts monotone")


# --- criterion 4: real JPEG corpus shows the quantity-quality tradeoff ---


def test_jpeg_corpus_quantity_curve():
    with capped(30.0):
        manifest = toy_corpus_manifest()
        ranking = toy_corpus_ranking(manifest)
        budget = StorageBudget.resolve(manifest, 20, "per_class")
        curve = quantity_curve(
            ranking,
            Q,
            budget.resolved_bytes["scene"],
            JpegBackend(),
            manifest.by_id(),
        )
        counts = {r.quality: r.n_q_mb for r in curve}
        rates = {r.quality: r.compression_rate for r in curve}
        ordered = [counts[q] for q in Q]
        assert all(a > b for a, b in zip(ordered, ordered[1:])), ordered
        assert rates[10] / rates[90] > 3.0
    announce(
        "jpeg-tradeoff",
        f"counts {ordered}, rate gain {rates[10] / rates[90]:.2f}x",
    )


# --- criteria 5 and 6: selector quality on the seeded benchmark ---


@pytest.fixture(scope="module")
def seeded_runs():
    """Datasets, budgets, and selector decisions for the five fixed seeds."""
    out = {}
    for seed in SEEDS:
        dataset = generate_synthetic(SyntheticConfig(seed=seed), Q)
        budget = StorageBudget.resolve(
            dataset.manifest, DEFAULT_BUDGET_EQUIVALENTS, "per_class"
        )
        out[seed] = (dataset, budget)
    return out


def test_selector_tracks_grid_best(seeded_runs):
    config = QualityCandidateSet(Q, 0.5)
    choices = {}
    with capped(10.0):
        for seed, (dataset, budget) in seeded_runs.items():
            choices[seed] = select_for_dataset(dataset, config, budget).chosen_quality
    grid_best = {}
    with capped(120.0):
        for seed, (dataset, budget) in seeded_runs.items():
            grid_best[seed] = grid_search(dataset, Q, budget).best_quality
    hits = 0
    for seed in SEEDS:
        gap = abs(Q.index(choices[seed]) - Q.index(grid_best[seed]))
        if gap <= 1:
            hits += 1
    assert hits >= 4, f"selector {choices}, grid {grid_best}"
    announce(
        "selector-vs-grid",
        f"{hits}/5 seeds equal or adjacent; selector {choices}, grid {grid_best}",
    )


def test_replay_beats_no_replay(seeded_runs):
    config = QualityCandidateSet(Q, 0.5)
    margins = {}
    with capped(30.0):
        for seed, (dataset, budget) in seeded_runs.items():
            chosen = select_for_dataset(dataset, config, budget).chosen_quality
            with_replay = run_continual(dataset, chosen, budget).aic
            without = run_continual(dataset, None, budget).aic
            margins[seed] = with_replay - without
            assert margins[seed] >= 0.02, f"seed {seed}: margin {margins[seed]:.4f}"
    worst = min(margins.values())
    announce("replay-benefit", f"worst seed margin {worst:.3f} >= 0.02")


# --- criterion 7: shrinking a buffer keeps the exact byte fraction ---


def test_shrink_fraction_85_to_40(tmp_path):
    with capped(1.0):
        samples = [
            SampleRecord(f"u-{j:03d}", "u", 0, f"payloads/u-{j:03d}.bin", 1000)
            for j in range(85)
        ]
        manifest = DatasetManifest(phases=[PhaseSpec(0, ("u",))], samples=samples)
        rng = np.random.default_rng(12)
        features = FeatureMatrix(
            rng.standard_normal((4, 85)).astype(np.float32),
            [rec.id for rec in samples],
        )
        rankings = rank_classes(manifest, features)
        budget = StorageBudget.resolve(manifest, 43, "per_class")
        built = build_buffer(
            50, manifest, rankings, SyntheticBackend(), budget, tmp_path / "buf"
        )
        assert len(built.entries) == 85
        before = sum(built.totals.values())
        shrunk = shrink_buffer_dir(tmp_path / "buf", 40)
        percent = 100.0 * sum(shrunk.totals.values()) / before
        assert abs(percent - 47.06) <= 0.01, percent
    announce("shrink-fraction", f"stored bytes fell to {percent:.4f}%")


# --- criterion 8: the full pipeline is deterministic byte for byte ---


def _pipeline(root):
    dataset = generate_synthetic(SyntheticConfig(seed=7), Q)
    doc = export_dataset(dataset, root)
    doc["backend"] = "synthetic"
    doc["budget"] = {"k": DEFAULT_BUDGET_EQUIVALENTS, "scope": "class"}
    config = root / "run.json"
    config.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")

    assert main(["select", "--config", str(config), "--out", str(root / "dec")]) == 0
    assert (
        main(
            [
                "build-buffer",
                "--config",
                str(config),
                "--decision",
                str(root / "dec" / "decision.json"),
                "--out",
                str(root / "buf"),
            ]
        )
        == 0
    )
    assert main(["shrink", "--buffer", str(root / "buf"), "--keep", "3"]) == 0
    return {
        "dataset": (root / "dataset.json").read_bytes(),
        "features": (root / "features_original.fmx").read_bytes(),
        "decision": (root / "dec" / "decision.json").read_bytes(),
        "buffer": (root / "buf" / "manifest.json").read_bytes(),
    }


def test_pipeline_is_deterministic(tmp_path, capsys):
    with capped(60.0):
        first = _pipeline(tmp_path / "one")
        second = _pipeline(tmp_path / "two")
    capsys.readouterr()
    for name in first:
        assert first[name] == second[name], f"{name} differs between runs"
    announce("determinism", "two pipeline runs byte-identical")
