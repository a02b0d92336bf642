"""Quality selection end to end on the synthetic benchmark.

For each candidate quality: pack the budget (quantity), compare packed
feature volumes against their uncompressed twins (fidelity), then keep
the candidates inside the epsilon band and pick the one storing the
most samples.
"""

from replaypack import (
    QualityCandidateSet,
    StorageBudget,
    SyntheticConfig,
    generate_synthetic,
    select_for_dataset,
)

CANDIDATES = (10, 25, 50, 75, 90)

dataset = generate_synthetic(SyntheticConfig(seed=7), CANDIDATES)
budget = StorageBudget.resolve(dataset.manifest, 4, "per_class")
print(
    f"benchmark: {len(dataset.manifest.classes())} classes over "
    f"{dataset.config.phases} phases, budget 4 originals per class"
)

decision = select_for_dataset(dataset, QualityCandidateSet(CANDIDATES, 0.5), budget)

print("\nquality  stored  volume ratio  feasible")
for report in decision.reports:
    mark = "yes" if report.feasible else "no"
    print(
        f"  q={report.quality:<4}  {report.n_q_mb:>4}    {report.ratio:>9.4f}    {mark}"
    )

print(f"\nfeasible set: {decision.feasible_set}")
print(f"chosen quality: {decision.chosen_quality} "
      f"(stores {decision.chosen_n} samples across phases)")

# low quality packs many samples but wrecks the geometry; high quality
# preserves geometry but stores too few.  The chosen quality is the
# cheapest one whose packed subset still looks like the original data.
drift = [d.chosen_quality for d in decision.per_phase]
print(f"per-phase choices (drift check): {drift}")
