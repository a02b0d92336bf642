"""Regenerate the frozen seed-7 decision fixture.

Usage: python3 tools/make_golden.py

Exports the default benchmark at seed 7, runs `replaypack select` on the
exported tree, and copies decision.json into tests/data/golden/.  The
CLI test compares future runs byte for byte against that file, so any
change to the selection pipeline that moves the numbers shows up as a
golden diff instead of a silent drift.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

from replaypack import SyntheticConfig, export_dataset, generate_synthetic
from replaypack.cli import main
from replaypack.harness import DEFAULT_BUDGET_EQUIVALENTS
from replaypack.selector import DEFAULT_CANDIDATES

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "data" / "golden"


def run() -> int:
    dataset = generate_synthetic(SyntheticConfig(seed=7), DEFAULT_CANDIDATES)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        doc = export_dataset(dataset, root)
        doc["backend"] = "synthetic"
        doc["budget"] = {"k": DEFAULT_BUDGET_EQUIVALENTS, "scope": "class"}
        config = root / "run.json"
        config.write_text(json.dumps(doc), encoding="utf-8")
        code = main(["select", "--config", str(config), "--out", str(root / "dec")])
        if code != 0:
            return code
        GOLDEN.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(root / "dec" / "decision.json", GOLDEN / "decision_seed7.json")
    decision = json.loads((GOLDEN / "decision_seed7.json").read_text())
    print(f"golden decision: q={decision['chosen_quality']} -> {GOLDEN}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
