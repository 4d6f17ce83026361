#!/usr/bin/env python3
"""A full budgeted search run against a planted synthetic objective.

Fifteen full evaluations: three retention-binned warmup probes, then guided
local edits with GP-assisted ranking and stagnation-triggered reseeding. The
planted optimum rewards subsets that retain about half the pool.
"""

import tempfile

from recipesearch.controller import SearchConfig, run_search
from recipesearch.oracle import SyntheticOracle, SyntheticOracleSpec
from recipesearch.pool import load_pool, load_signals
from recipesearch.recipe import describe_recipe
from recipesearch.synthetic import write_synthetic_dataset


def main():
    workdir = tempfile.mkdtemp(prefix="recipesearch_demo_")
    paths = write_synthetic_dataset(workdir, n_samples=300, sae_dim=48, seed=21)
    pool = load_pool(paths[0])
    signals = load_signals(paths[1], paths[2], pool)

    oracle = SyntheticOracle(SyntheticOracleSpec(
        family="planted_quadratic", offset=1.0,
        weights={"retain_ratio": 1.0, "token_ratio": 0.5},
        targets={"retain_ratio": 0.5, "token_ratio": 0.5},
        noise_std=0.01, noise_seed=2,
    ))
    config = SearchConfig(budget=15, patience=4, candidates_per_step=5,
                          master_seed=7)

    events = []
    result = run_search(config, pool, signals, oracle, sink=events.append)

    reseed_steps = {e["step"] for e in events if e["type"] == "reseed"}
    print("step | warmup | reseed | size | score   | best    | recipe")
    best = float("-inf")
    for record in result.records:
        best = max(best, record.score)
        marks = ("warm" if record.is_warmup else "    ",
                 "  * " if record.step in reseed_steps else "    ")
        print(f"{record.step:4d} | {marks[0]} | {marks[1]} | {record.subset_size:4d} "
              f"| {record.score:.4f} | {best:.4f} | {describe_recipe(record.recipe)}")

    print(f"\nincumbent (step {result.incumbent_step}, "
          f"score {result.incumbent_score:.4f}):")
    print("  " + describe_recipe(result.incumbent_recipe))
    print(f"  selected {len(result.incumbent_ids)} of {len(pool)} samples")

    guidance = [e for e in events if e["type"] == "guidance"][-1]
    print("\nlast search guidance:")
    for finding in guidance["findings"]:
        print(f"  - {finding}")


if __name__ == "__main__":
    main()
