#!/usr/bin/env python3
"""Calibration sweep behind the default synthetic benchmark constants.

The defaults in replaypack.harness must satisfy four empirical
properties at once, across the fixed seed set:

  1. the grid-search optimum is an interior candidate (not min/max of Q)
     in at least 4 of 5 seeds;
  2. the selector's choice equals or is adjacent to the grid optimum in
     at least 4 of 5 seeds;
  3. replay at the selected quality beats the no-replay baseline by at
     least 0.02 mean accuracy in every seed;
  4. the seed-7 fixture selects quality 50 (the golden CLI answer).

Run this after touching the generator or the selector defaults; it
prints a scorecard per parameter combination and flags the one the
package currently ships.

    python3 tools/calibrate_synthetic.py            # score the shipped defaults
    python3 tools/calibrate_synthetic.py --sweep    # rescan the neighborhood
"""

from __future__ import annotations

import argparse
import itertools

from replaypack import (
    DEFAULT_CANDIDATES,
    QualityCandidateSet,
    StorageBudget,
    SyntheticConfig,
    generate_synthetic,
    grid_search,
    run_continual,
    select_for_dataset,
)
from replaypack.harness import (
    DEFAULT_BUDGET_EQUIVALENTS,
    DEFAULT_CLUSTER_SPREAD,
    DEFAULT_NOISE_EXPONENT,
    DEFAULT_NOISE_SCALE,
)

SEEDS = (0, 1, 2, 3, 4)
GOLDEN_SEED = 7
QUALITIES = list(DEFAULT_CANDIDATES)
INTERIOR = set(QUALITIES[1:-1])


def score(spread: float, noise: float, exponent: float, budget_k: int) -> dict:
    picks = []
    for seed in (*SEEDS, GOLDEN_SEED):
        config = SyntheticConfig(
            cluster_spread=spread,
            noise_scale=noise,
            noise_exponent=exponent,
            seed=seed,
        )
        dataset = generate_synthetic(config, QUALITIES)
        budget = StorageBudget.resolve(dataset.manifest, budget_k, "per_class")
        decision = select_for_dataset(dataset, QualityCandidateSet(), budget)
        grid = grid_search(dataset, QUALITIES, budget)
        baseline = run_continual(dataset, None, budget)
        chosen_aic = {row.quality: row.metrics.aic for row in grid.rows}[
            decision.chosen_quality
        ]
        picks.append(
            {
                "seed": seed,
                "selector": decision.chosen_quality,
                "grid": grid.best_quality,
                "benefit": chosen_aic - baseline.aic,
            }
        )
    main = [p for p in picks if p["seed"] in SEEDS]
    golden = next(p for p in picks if p["seed"] == GOLDEN_SEED)
    return {
        "interior": sum(p["grid"] in INTERIOR for p in main),
        "adjacent": sum(
            abs(QUALITIES.index(p["selector"]) - QUALITIES.index(p["grid"])) <= 1
            for p in main
        ),
        "min_benefit": min(p["benefit"] for p in main),
        "golden_choice": golden["selector"],
        "picks": picks,
    }


def verdict(result: dict) -> bool:
    return (
        result["interior"] >= 4
        and result["adjacent"] >= 4
        and result["min_benefit"] >= 0.02
        and result["golden_choice"] == 50
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sweep", action="store_true", help="scan the neighborhood")
    args = parser.parse_args()

    shipped = (
        DEFAULT_CLUSTER_SPREAD,
        DEFAULT_NOISE_SCALE,
        DEFAULT_NOISE_EXPONENT,
        DEFAULT_BUDGET_EQUIVALENTS,
    )
    if args.sweep:
        grid = itertools.product(
            (2.0, 2.5, 3.0), (6.0, 8.0, 10.0), (3.0, 4.0), (4, 6)
        )
    else:
        grid = [shipped]

    for spread, noise, exponent, budget_k in grid:
        result = score(spread, noise, exponent, budget_k)
        tag = " <== shipped" if (spread, noise, exponent, budget_k) == shipped else ""
        print(
            f"spread={spread} noise={noise} p={exponent} k={budget_k}: "
            f"interior={result['interior']}/5 adjacent={result['adjacent']}/5 "
            f"min_benefit={result['min_benefit']:.3f} "
            f"seed7={result['golden_choice']} "
            f"{'OK' if verdict(result) else 'reject'}{tag}"
        )
        for p in result["picks"]:
            print(
                f"    seed {p['seed']}: selector={p['selector']} "
                f"grid={p['grid']} benefit={p['benefit']:.3f}"
            )


if __name__ == "__main__":
    main()
