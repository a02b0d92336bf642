"""Command-line front end.

Conventions shared by every subcommand: stdout carries exactly the
machine-consumable answer, diagnostics go to stderr, and the exit code
is 0 on success, 1 on validation failure, 2 on I/O failure.  File-based
commands read a JSON run config (``--config``) whose fields individual
flags override; the synthetic benchmark commands need no config at all.

Run config schema::

    {"manifest": "dataset.json",
     "features": {"original": "features_original.fmx",
                  "by_quality": {"10": "features_q010.fmx", ...}},
     "backend": "synthetic",
     "qualities": [10, 25, 50, 75, 90],
     "epsilon": 0.5,
     "budget": {"k": 8, "scope": "class"}}

Relative paths inside the config resolve against the config file's
directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .buffer import MANIFEST_NAME, build_buffer, load_buffer, shrink_buffer_dir
from .compression import (
    BudgetScope,
    StorageBudget,
    make_backend,
    quantity_curve,
)
from .errors import ManifestError, ReplayPackError
from .features import (
    DatasetManifest,
    FeatureMatrix,
    load_dataset_manifest,
    read_feature_matrix,
)
from .harness import (
    DEFAULT_BUDGET_EQUIVALENTS,
    SyntheticConfig,
    generate_synthetic,
    grid_search,
    run_continual,
    select_for_dataset,
)
from .selection import rank_classes
from .selector import (
    DEFAULT_CANDIDATES,
    DEFAULT_EPSILON,
    PhaseInputs,
    QualityCandidateSet,
    decide_across_phases,
    evaluate_candidates,
)


def _eprint(message: str) -> None:
    print(message, file=sys.stderr)


def _json_dumps(doc: object) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _parse_qualities(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ManifestError(f"bad quality list {text!r}; expected e.g. 10,25,50") from None
    if not values:
        raise ManifestError("quality list is empty")
    return values


_SCOPES = {"class": BudgetScope.PER_CLASS, "phase": BudgetScope.PER_PHASE}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run config")
    parser.add_argument("--out", type=Path, help="directory for report files")
    parser.add_argument("--seed", type=int, help="synthetic benchmark seed")
    parser.add_argument("--epsilon", type=float, help="feasibility band half-width")
    parser.add_argument(
        "--qualities", type=str, help="comma-separated candidate qualities"
    )
    parser.add_argument(
        "--budget-k", type=int, help="budget in original-sample equivalents"
    )
    parser.add_argument(
        "--budget-scope", choices=sorted(_SCOPES), help="budget accounting scope"
    )
    parser.add_argument(
        "--backend", choices=["jpeg", "synthetic", "identity"], help="compressor"
    )


class RunSettings:
    """Merged view of the config file and command-line overrides."""

    def __init__(self, args: argparse.Namespace):
        self.config_dir = Path(".")
        doc: dict = {}
        if args.config is not None:
            self.config_dir = args.config.parent
            try:
                doc = json.loads(args.config.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{args.config}: not valid JSON ({exc})") from None
            if not isinstance(doc, dict):
                raise ManifestError(f"{args.config}: config must be a JSON object")
        self.doc = doc
        self.args = args

        qualities = getattr(args, "qualities", None)
        if qualities is not None:
            self.qualities = _parse_qualities(qualities)
        elif "qualities" in doc:
            self.qualities = tuple(int(q) for q in doc["qualities"])
        else:
            self.qualities = DEFAULT_CANDIDATES

        epsilon = getattr(args, "epsilon", None)
        if epsilon is not None:
            self.epsilon = float(epsilon)
        else:
            self.epsilon = float(doc.get("epsilon", DEFAULT_EPSILON))

        backend = getattr(args, "backend", None)
        self.backend_name = backend or doc.get("backend", "synthetic")

        budget_doc = doc.get("budget", {})
        budget_k = getattr(args, "budget_k", None)
        self.budget_k = (
            int(budget_k)
            if budget_k is not None
            else int(budget_doc.get("k", DEFAULT_BUDGET_EQUIVALENTS))
        )
        scope_flag = getattr(args, "budget_scope", None)
        scope_name = scope_flag or budget_doc.get("scope", "class")
        if scope_name not in _SCOPES:
            raise ManifestError(f"unknown budget scope {scope_name!r}")
        self.budget_scope = _SCOPES[scope_name]

        seed = getattr(args, "seed", None)
        self.seed = int(seed) if seed is not None else int(doc.get("seed", 0))

    def _resolve(self, path_text: str) -> Path:
        path = Path(path_text)
        return path if path.is_absolute() else self.config_dir / path

    def candidate_set(self) -> QualityCandidateSet:
        return QualityCandidateSet(candidates=self.qualities, epsilon=self.epsilon)

    def manifest(self) -> DatasetManifest:
        if "manifest" not in self.doc:
            raise ManifestError("config needs a 'manifest' path for this command")
        return load_dataset_manifest(self._resolve(self.doc["manifest"]))

    def original_features(self) -> FeatureMatrix:
        features = self.doc.get("features", {})
        if "original" not in features:
            raise ManifestError("config needs features.original for this command")
        return read_feature_matrix(self._resolve(features["original"]))

    def features_by_quality(self) -> dict[int, FeatureMatrix]:
        features = self.doc.get("features", {})
        out: dict[int, FeatureMatrix] = {}
        for key, path_text in features.get("by_quality", {}).items():
            out[int(key)] = read_feature_matrix(self._resolve(path_text))
        return out

    def budget(self, manifest: DatasetManifest) -> StorageBudget:
        return StorageBudget.resolve(manifest, self.budget_k, self.budget_scope)

    def synthetic_config(self) -> SyntheticConfig:
        synth = dict(self.doc.get("synthetic", {}))
        allowed = {
            "dim",
            "classes_per_phase",
            "phases",
            "samples_per_class",
            "cluster_spread",
            "noise_scale",
            "noise_exponent",
        }
        unknown = set(synth) - allowed
        if unknown:
            raise ManifestError(f"unknown synthetic config keys: {sorted(unknown)}")
        try:
            return SyntheticConfig(seed=self.seed, **synth)
        except ValueError as exc:
            raise ManifestError(f"bad synthetic config: {exc}") from None


def _phase_inputs_from_files(settings: RunSettings) -> tuple[list[PhaseInputs], object, object]:
    manifest = settings.manifest()
    original = settings.original_features()
    backend = make_backend(settings.backend_name)
    by_quality = {} if backend.lossless_features else settings.features_by_quality()
    rankings = rank_classes(manifest, original)
    samples = manifest.by_id()
    inputs = [
        PhaseInputs(
            phase_index=phase.index,
            rankings=[rankings[label] for label in phase.classes],
            original_features=original,
            features_by_quality=by_quality,
            samples=samples,
        )
        for phase in manifest.phases
        if phase.classes
    ]
    return inputs, manifest, backend


def cmd_rank(args: argparse.Namespace) -> int:
    settings = RunSettings(args)
    manifest = settings.manifest()
    features = settings.original_features()
    rankings = rank_classes(manifest, features)
    out_dir = args.out or Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for label in sorted(rankings):
        ranking = rankings[label]
        doc = {
            "class": ranking.class_label,
            "ranked_ids": ranking.ranked_ids,
            "distances": ranking.distances,
        }
        (out_dir / f"rank_{label}.json").write_text(
            _json_dumps(doc), encoding="utf-8"
        )
    _eprint(f"wrote {len(rankings)} ranking files to {out_dir}")
    return 0


def cmd_pack(args: argparse.Namespace) -> int:
    settings = RunSettings(args)
    inputs, manifest, backend = _phase_inputs_from_files(settings)
    budget = settings.budget(manifest)
    samples = manifest.by_id()
    rows = []
    for phase_inputs_ in inputs:
        for ranking in sorted(phase_inputs_.rankings, key=lambda r: r.class_label):
            if settings.budget_scope is BudgetScope.PER_CLASS:
                budget_bytes = budget.resolved_bytes[ranking.class_label]
            else:
                budget_bytes = budget.resolved_bytes[phase_inputs_.phase_index]
            for result in quantity_curve(
                ranking, settings.qualities, budget_bytes, backend, samples
            ):
                rows.append(
                    {
                        "phase": phase_inputs_.phase_index,
                        "class": ranking.class_label,
                        "quality": result.quality,
                        "n_q_mb": result.n_q_mb,
                        "bytes_used": result.bytes_used,
                        "compression_rate": result.compression_rate,
                    }
                )
    text = _csv_text(
        ["phase", "class", "quality", "n_q_mb", "bytes_used", "compression_rate"], rows
    )
    sys.stdout.write(text)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "packing.csv").write_text(text, encoding="utf-8")
        (args.out / "packing.json").write_text(_json_dumps(rows), encoding="utf-8")
    return 0


def cmd_volumes(args: argparse.Namespace) -> int:
    settings = RunSettings(args)
    inputs, manifest, backend = _phase_inputs_from_files(settings)
    budget = settings.budget(manifest)
    config = settings.candidate_set()
    doc = []
    for phase_inputs_ in inputs:
        reports = evaluate_candidates(phase_inputs_, config, budget, backend)
        doc.append(
            {
                "phase": phase_inputs_.phase_index,
                "reports": [r.volume.to_dict() for r in reports],
            }
        )
    text = _json_dumps(doc)
    sys.stdout.write(text)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "volumes.json").write_text(text, encoding="utf-8")
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    settings = RunSettings(args)
    inputs, manifest, backend = _phase_inputs_from_files(settings)
    budget = settings.budget(manifest)
    config = settings.candidate_set()
    per_phase = [
        evaluate_candidates(phase_inputs_, config, budget, backend)
        for phase_inputs_ in inputs
    ]
    decision = decide_across_phases(per_phase, config)
    if decision.fallback_used:
        _eprint(
            "no candidate satisfied the volume-ratio band; "
            f"falling back to q={decision.chosen_quality}"
        )
    sys.stdout.write(f"{decision.chosen_quality}\n")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "decision.json").write_text(
            _json_dumps(decision.to_dict()), encoding="utf-8"
        )
    return 0


def cmd_build_buffer(args: argparse.Namespace) -> int:
    settings = RunSettings(args)
    manifest = settings.manifest()
    features = settings.original_features()
    backend = make_backend(settings.backend_name)
    budget = settings.budget(manifest)
    rankings = rank_classes(manifest, features)
    if args.quality is not None:
        quality = int(args.quality)
    elif args.decision is not None:
        doc = json.loads(Path(args.decision).read_text(encoding="utf-8"))
        quality = int(doc["chosen_quality"])
    else:
        raise ManifestError("build-buffer needs --quality or --decision")
    out_dir = args.out or Path("buffer")
    # payload paths in the manifest resolve against the config directory
    manifest = _rebase_payloads(manifest, settings.config_dir)
    built = build_buffer(quality, manifest, rankings, backend, budget, out_dir)
    _eprint(
        f"stored {len(built.entries)} samples at q={quality} under {out_dir}"
    )
    sys.stdout.write(str(out_dir / MANIFEST_NAME) + "\n")
    return 0


def _rebase_payloads(manifest: DatasetManifest, base: Path) -> DatasetManifest:
    samples = []
    for rec in manifest.samples:
        path = Path(rec.payload_path)
        if not path.is_absolute():
            rec = replace(rec, payload_path=str(base / path))
        samples.append(rec)
    return DatasetManifest(phases=manifest.phases, samples=samples)


def cmd_shrink(args: argparse.Namespace) -> int:
    manifest = shrink_buffer_dir(args.buffer, args.keep)
    _eprint(
        f"kept {len(manifest.entries)} samples; totals "
        + json.dumps(manifest.totals, sort_keys=True)
    )
    sys.stdout.write(str(Path(args.buffer) / MANIFEST_NAME) + "\n")
    return 0


def _metrics_row(quality: object, ratio: object, metrics) -> dict:
    counts = metrics.replay_counts.values()
    n_per_class = (sum(counts) / len(counts)) if counts else 0.0
    return {
        "quality": quality if quality is not None else "",
        "n_per_class": f"{n_per_class:.2f}",
        "ratio": f"{ratio:.6f}" if ratio is not None else "",
        "aic": f"{metrics.aic:.6f}",
        "forgetting": f"{metrics.averaged_forgetting:.6f}",
    }


_METRIC_COLUMNS = ["quality", "n_per_class", "ratio", "aic", "forgetting"]


def _synthetic_parts(settings: RunSettings):
    config = settings.synthetic_config()
    qualities = settings.qualities
    dataset = generate_synthetic(config, qualities)
    budget = StorageBudget.resolve(
        dataset.manifest, settings.budget_k, settings.budget_scope
    )
    return config, dataset, budget


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = RunSettings(args)
    config, dataset, budget = _synthetic_parts(settings)
    candidate_set = settings.candidate_set()
    ratios: dict[int, float] = {}
    if args.no_replay:
        quality = None
    else:
        decision = select_for_dataset(dataset, candidate_set, budget)
        ratios = {r.quality: r.ratio for r in decision.reports}
        if args.quality is not None:
            quality = int(args.quality)
        else:
            quality = decision.chosen_quality
            _eprint(f"selector chose q={quality}")
    metrics = run_continual(dataset, quality, budget)
    row = _metrics_row(quality, ratios.get(quality), metrics)
    text = _csv_text(_METRIC_COLUMNS, [row])
    sys.stdout.write(text)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "simulate.csv").write_text(text, encoding="utf-8")
        summary = {
            "quality": quality,
            "seed": config.seed,
            "metrics": metrics.to_dict(),
        }
        (args.out / "simulate.json").write_text(_json_dumps(summary), encoding="utf-8")
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    settings = RunSettings(args)
    config, dataset, budget = _synthetic_parts(settings)
    candidate_set = settings.candidate_set()
    decision = select_for_dataset(dataset, candidate_set, budget)
    ratios = {r.quality: r.ratio for r in decision.reports}
    result = grid_search(dataset, settings.qualities, budget)
    rows = [
        _metrics_row(row.quality, ratios.get(row.quality), row.metrics)
        for row in result.rows
    ]
    text = _csv_text(_METRIC_COLUMNS, rows)
    sys.stdout.write(text)
    _eprint(
        f"grid best q={result.best_quality}; selector chose q={decision.chosen_quality}"
    )
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "grid.csv").write_text(text, encoding="utf-8")
        summary = {
            "best_quality": result.best_quality,
            "selector_quality": decision.chosen_quality,
            "seed": config.seed,
            "rows": [
                {"quality": row.quality, "metrics": row.metrics.to_dict()}
                for row in result.rows
            ],
        }
        (args.out / "grid.json").write_text(_json_dumps(summary), encoding="utf-8")
    return 0


def _csv_text(columns: list[str], rows: list[dict]) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in columns})
    return out.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replaypack",
        description="Budgeted compressed replay buffers with analytic quality selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rank = sub.add_parser("rank", help="write per-class exemplar rankings")
    _add_common(p_rank)
    p_rank.set_defaults(func=cmd_rank)

    p_pack = sub.add_parser("pack", help="quantity curve per class and quality")
    _add_common(p_pack)
    p_pack.set_defaults(func=cmd_pack)

    p_volumes = sub.add_parser("volumes", help="volume-ratio reports per phase")
    _add_common(p_volumes)
    p_volumes.set_defaults(func=cmd_volumes)

    p_select = sub.add_parser("select", help="choose the storage quality")
    _add_common(p_select)
    p_select.set_defaults(func=cmd_select)

    p_build = sub.add_parser("build-buffer", help="compress and store exemplars")
    _add_common(p_build)
    p_build.add_argument("--quality", type=int, help="storage quality")
    p_build.add_argument("--decision", type=Path, help="decision.json from select")
    p_build.set_defaults(func=cmd_build_buffer)

    p_shrink = sub.add_parser("shrink", help="drop ranks past a per-class keep count")
    p_shrink.add_argument("--buffer", type=Path, required=True, help="buffer directory")
    p_shrink.add_argument("--keep", type=int, required=True, help="samples to keep per class")
    p_shrink.set_defaults(func=cmd_shrink)

    p_sim = sub.add_parser("simulate", help="run the synthetic continual benchmark")
    _add_common(p_sim)
    p_sim.add_argument("--quality", type=int, help="replay quality (default: selector)")
    p_sim.add_argument("--no-replay", action="store_true", help="baseline without replay")
    p_sim.set_defaults(func=cmd_simulate)

    p_grid = sub.add_parser("grid", help="exhaustive quality sweep on the benchmark")
    _add_common(p_grid)
    p_grid.set_defaults(func=cmd_grid)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ReplayPackError as exc:
        _eprint(f"error: {exc}")
        return 1
    except OSError as exc:
        _eprint(f"i/o error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
