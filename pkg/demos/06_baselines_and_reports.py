#!/usr/bin/env python3
"""Baselines and ledger reports, end to end through the command-line surface.

Runs the guided search plus two baseline suites against the same planted
objective, then derives the CSV reports and prints the comparison table.
"""

import json
import tempfile
from pathlib import Path

from recipesearch.cli import main as cli


def main():
    work = Path(tempfile.mkdtemp(prefix="recipesearch_demo_"))
    from recipesearch.synthetic import write_synthetic_dataset

    pool_path, signals_path, targets_path = write_synthetic_dataset(
        str(work / "data"), n_samples=300, sae_dim=48, seed=33
    )
    data = ["--pool", pool_path, "--signals", signals_path,
            "--targets", targets_path]

    spec_path = work / "oracle.json"
    spec_path.write_text(json.dumps({
        "family": "planted_quadratic", "offset": 1.0,
        "weights": {"retain_ratio": 1.0}, "targets": {"retain_ratio": 0.5},
    }))
    oracle = ["--oracle", "synthetic", "--oracle-spec", str(spec_path)]

    print("== guided search ==")
    cli(["run"] + data + oracle
        + ["--out-dir", str(work / "search"), "--budget", "15", "--master-seed", "3"])

    print("\n== random recipe baseline ==")
    cli(["baseline"] + data + oracle
        + ["--suite", "random_recipe", "--budget", "15", "--master-seed", "3",
           "--out-dir", str(work / "random_recipe")])

    print("\n== single-operator baseline ==")
    cli(["baseline"] + data + oracle
        + ["--suite", "single_op", "--out-dir", str(work / "single_op")])

    print("\n== reports ==")
    ledgers = [str(work / d / "ledger.jsonl")
               for d in ("search", "random_recipe", "single_op")]
    cli(["report"] + ledgers + ["--out-dir", str(work / "reports")])

    print("\ncomparison table:")
    print((work / "reports" / "comparison.csv").read_text())

    print("best-so-far curve of the guided search (from curves.csv):")
    import csv

    with open(work / "reports" / "curves.csv") as fh:
        for row in csv.DictReader(fh):
            if row["ledger"].endswith("search/ledger.jsonl"):
                print(f"  step {int(row['step']):2d}: raw={float(row['score']):.4f} "
                      f"best={float(row['best_so_far']):.4f}")


if __name__ == "__main__":
    main()
