"""Command-line surface: ingestion checks, execution, search runs, reports.

Subcommands: ingest-check, exec, run, baseline, report, compare. Runs write
an append-only JSONL ledger (header line first, then eval and event lines in
step order) plus the best-recipe JSON and the selected-subset manifest.
Reports are pure functions of ledger bytes and come out as CSV files.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from .controller import (
    ControllerError,
    EvalRecord,
    History,
    SearchConfig,
    WARMUP_COUNT,
    role_rng,
    run_search,
)
from .operators import (
    AO_TOPFRAC,
    IFD_TOPFRAC,
    MONA_FILTER,
    NGRAM_TOPFRAC,
    RANDOM_K,
    SEMDEDUP,
    STOCHASTIC_OPERATORS,
    VARENTROPY_TOPFRAC,
    OperatorSpec,
    Subset,
    default_catalog,
)
from .oracle import (
    CommandOracle,
    EvalCache,
    EvalRequest,
    OracleError,
    SyntheticOracle,
    SyntheticOracleSpec,
    write_manifest,
)
from .pool import PoolError, load_pool, load_signals
from .recipe import (
    ExecutionError,
    Recipe,
    RecipeValidationError,
    describe_recipe,
    encode_recipe,
    execute_recipe,
    parse_recipe,
    recipe_to_obj,
    sample_random_recipe,
)
from .state import compute_state

logger = logging.getLogger(__name__)

ENV_ASSISTANT_PREFIX = "RECIPESEARCH_ASSISTANT_CMD"

SINGLE_OP_SELECTORS = (
    MONA_FILTER, IFD_TOPFRAC, VARENTROPY_TOPFRAC, NGRAM_TOPFRAC, AO_TOPFRAC, SEMDEDUP,
)
# Size-controlled selectors default to half retention; relevance filtering
# keeps its conventional much smaller per-benchmark fraction.
SINGLE_OP_DEFAULT_FRACTION = 0.5
SINGLE_OP_MONA_FRACTION = 0.05
SINGLE_OP_SEMDEDUP_TAU = 0.75


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


class RunLedger:
    """Append-only JSONL run ledger: header first, one JSON object per line."""

    def __init__(self, path: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")

    def write(self, event: dict) -> None:
        self._fh.write(json.dumps(_jsonable(event), sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_ledger(path: str) -> tuple[list[dict], int]:
    """Parse a ledger; corrupt lines are skipped and counted."""
    events: list[dict] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                skipped += 1
    if skipped:
        logger.warning("%s: skipped %d corrupt ledger line(s)", path, skipped)
    return events, skipped


# ---------------------------------------------------------------------------
# Shared argument plumbing
# ---------------------------------------------------------------------------

def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pool", required=True, help="pool JSONL file")
    p.add_argument("--signals", required=True, help="signals JSONL file")
    p.add_argument("--targets", required=True, help="benchmark targets JSON file")


def _add_oracle_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--oracle", choices=("synthetic", "command"), default="synthetic",
        help="evaluation oracle kind",
    )
    p.add_argument("--oracle-spec", help="synthetic oracle spec JSON file")
    p.add_argument(
        "--oracle-cmd", nargs="+", help="external evaluation command argv"
    )
    p.add_argument(
        "--oracle-timeout", type=float, default=None,
        help="external command timeout in seconds",
    )


def _load_data(args):
    pool = load_pool(args.pool)
    signals = load_signals(args.signals, args.targets, pool)
    return pool, signals


def _build_oracle(args, pool, out_dir: Path):
    if args.oracle == "command":
        if not args.oracle_cmd:
            raise SystemExit("--oracle command requires --oracle-cmd")
        kwargs = {}
        if args.oracle_timeout:
            kwargs["timeout"] = args.oracle_timeout
        return CommandOracle(args.oracle_cmd, str(out_dir / "manifests"), pool, **kwargs)
    if args.oracle_spec:
        with open(args.oracle_spec, encoding="utf-8") as fh:
            spec = SyntheticOracleSpec.from_dict(json.load(fh))
    else:
        spec = SyntheticOracleSpec(family="constant", value=0.0)
    return SyntheticOracle(spec)


def _assistant_commands(args) -> dict[str, list[str]]:
    commands: dict[str, list[str]] = {}
    for spec in args.assistant_cmd or []:
        role, _, cmd = spec.partition("=")
        if not cmd:
            raise SystemExit(f"--assistant-cmd must look like role=command, got {spec!r}")
        commands[role] = cmd.split()
    default_env = os.environ.get(ENV_ASSISTANT_PREFIX)
    for role in ("summarizer", "proposer", "ranker", "reseeder"):
        env = os.environ.get(f"{ENV_ASSISTANT_PREFIX}_{role.upper()}")
        if env:
            commands[role] = env.split()
        elif default_env and role not in commands:
            commands[role] = default_env.split()
    return commands


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest_check(args) -> int:
    try:
        pool, signals = _load_data(args)
    except (PoolError, OSError) as exc:
        print(f"ingest-check failed: {exc}", file=sys.stderr)
        return 1
    print(f"pool: {len(pool)} samples, {pool.total_tokens} tokens")
    print(f"pool digest: {pool.content_digest()}")
    print(f"signals: sae_dim {signals.sae_dim}, benchmarks {', '.join(signals.benchmarks)}")
    print(f"mean ifd {signals.pool_mean_ifd:.4f}, mean varentropy {signals.pool_mean_varentropy:.4f}")
    return 0


def _apply_seed_overrides(recipe: Recipe, seeds: list[int] | None) -> Recipe:
    stochastic = [
        (i, s.operator) for i, s in enumerate(recipe.steps)
        if s.operator in STOCHASTIC_OPERATORS
    ]
    if not seeds:
        return recipe
    if any(s < 0 for s in seeds):
        raise SystemExit("seed overrides must be nonnegative integers")
    if not stochastic:
        logger.warning("recipe has no stochastic steps; seed overrides ignored")
        print("warning: recipe has no stochastic steps; seed overrides ignored",
              file=sys.stderr)
        return recipe
    if len(seeds) != len(stochastic):
        names = ", ".join(f"step {i + 1} ({op})" for i, op in stochastic)
        raise SystemExit(
            f"{len(seeds)} seed override(s) for {len(stochastic)} stochastic step(s): {names}"
        )
    steps = list(recipe.steps)
    for (i, _), seed in zip(stochastic, seeds):
        params = dict(steps[i].params)
        params["seed"] = int(seed)
        steps[i] = OperatorSpec(steps[i].operator, params)
    return Recipe(tuple(steps))


def cmd_exec(args) -> int:
    try:
        pool, signals = _load_data(args)
    except (PoolError, OSError) as exc:
        print(f"ingestion failed: {exc}", file=sys.stderr)
        return 1
    catalog = default_catalog(len(pool))
    try:
        recipe = parse_recipe(Path(args.recipe).read_text(), catalog, args.l_max)
    except RecipeValidationError as exc:
        print("recipe rejected:", file=sys.stderr)
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
        return 1
    recipe = _apply_seed_overrides(recipe, args.seeds)
    try:
        subset = execute_recipe(recipe, pool, signals)
    except ExecutionError as exc:
        print(f"execution aborted: {exc}", file=sys.stderr)
        return 1
    state = compute_state(subset, pool, signals)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    request = EvalRequest(
        run_id=args.run_id or "exec", step=0, recipe=recipe, subset=subset,
    )
    write_manifest(str(out), pool, request)
    state_path = args.state_out or str(out) + ".state.json"
    with open(state_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(state.to_dict()), fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"selected {len(subset)} of {len(pool)} samples -> {out}")
    print(f"state vector -> {state_path}")
    return 0


def _write_run_outputs(out_dir: Path, result, pool) -> None:
    best = {
        "recipe": recipe_to_obj(result.incumbent_recipe),
        "score": result.incumbent_score,
        "step": result.incumbent_step,
        "subset_size": len(result.incumbent_ids),
    }
    with open(out_dir / "best_recipe.json", "w", encoding="utf-8") as fh:
        json.dump(_jsonable(best), fh, sort_keys=True, indent=2)
        fh.write("\n")
    request = EvalRequest(
        run_id="best", step=result.incumbent_step,
        recipe=result.incumbent_recipe,
        subset=Subset.from_ids(result.incumbent_ids, pool),
    )
    write_manifest(str(out_dir / "best_subset.jsonl"), pool, request)


def cmd_run(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        pool, signals = _load_data(args)
    except (PoolError, OSError) as exc:
        print(f"ingestion failed: {exc}", file=sys.stderr)
        return 1
    config = SearchConfig(
        budget=args.budget,
        patience=args.patience,
        candidates_per_step=args.candidates,
        l_max=args.l_max,
        master_seed=args.master_seed,
        assistant_mode=args.assistant_mode,
        assistant_commands=_assistant_commands(args),
        random_select=args.random_select,
        run_id=args.run_id,
    )
    try:
        config.validate()
    except ControllerError as exc:
        print(f"config rejected: {exc}", file=sys.stderr)
        return 2
    catalog = default_catalog(len(pool))
    oracle = _build_oracle(args, pool, out_dir)
    ledger = RunLedger(str(out_dir / "ledger.jsonl"))
    (out_dir / "catalog.json").write_text(catalog.to_json() + "\n", encoding="utf-8")
    ledger.write({
        "type": "header",
        "run_id": config.resolved_run_id(),
        "mode": "search",
        "config": config.to_dict(),
        "catalog_digest": catalog.digest(),
        "pool_digest": pool.content_digest(),
    })
    try:
        result = run_search(config, pool, signals, oracle, catalog=catalog,
                            sink=ledger.write)
    except (OracleError, ControllerError) as exc:
        ledger.write({"type": "abort", "error": str(exc)})
        ledger.close()
        print(f"run aborted: {exc} (partial ledger kept at {ledger.path})", file=sys.stderr)
        return 1
    ledger.write({
        "type": "result",
        "incumbent_step": result.incumbent_step,
        "score": result.incumbent_score,
        "recipe": recipe_to_obj(result.incumbent_recipe),
        "subset_size": len(result.incumbent_ids),
    })
    ledger.close()
    _write_run_outputs(out_dir, result, pool)
    print(f"incumbent score {result.incumbent_score:.6f} at step {result.incumbent_step}")
    print(f"incumbent recipe: {describe_recipe(result.incumbent_recipe)}")
    print(f"artifacts in {out_dir}")
    return 0


def _baseline_records(args, pool, signals, catalog, oracle, ledger) -> int:
    """Shared evaluation loop for the baseline suites; returns record count."""
    history = History(pool)
    cache = EvalCache()
    run_id = args.run_id or f"baseline-{args.suite}-seed{args.master_seed}"

    def evaluate(step: int, recipe: Recipe, subset) -> None:
        state = compute_state(subset, pool, signals)
        subset_hash = subset.content_hash()
        outcome = cache.lookup(subset_hash)
        if outcome is None:
            request = EvalRequest(run_id=run_id, step=step, recipe=recipe, subset=subset)
            outcome = oracle.evaluate(request, state)
            cache.store(subset_hash, outcome)
        record = EvalRecord(
            step=step,
            recipe=recipe,
            encoding=encode_recipe(recipe, catalog),
            state=state,
            score=float(outcome.score),
            per_benchmark=outcome.per_benchmark,
            subset_size=len(subset),
            subset_hash=subset_hash,
            seed_phase=1,
            is_warmup=False,
            cache_hit=outcome.cache_hit,
            duration_s=outcome.duration_s,
        )
        history.append(record, subset)
        ledger.write(record.to_event())

    rng = role_rng(args.master_seed, 0, "baseline")
    step = 0
    if args.suite == "random_recipe":
        while step < args.budget:
            recipe = sample_random_recipe(catalog, rng, args.l_max, allow_mix=False)
            try:
                subset = execute_recipe(recipe, pool, signals)
            except ExecutionError:
                continue
            step += 1
            evaluate(step, recipe, subset)
    elif args.suite == "random_topk":
        k = args.size or max(1, len(pool) // 2)
        for step in range(1, args.budget + 1):
            seed = int(rng.integers(0, 2**31 - 1))
            recipe = Recipe((OperatorSpec(RANDOM_K, {"k": int(k), "seed": seed}),))
            subset = execute_recipe(recipe, pool, signals)
            evaluate(step, recipe, subset)
    elif args.suite == "single_op":
        for selector in SINGLE_OP_SELECTORS:
            if selector == SEMDEDUP:
                params = {
                    "n_clusters": max(1, min(len(pool) // 64, 32)) if args.clusters is None
                    else args.clusters,
                    "tau": args.tau if args.tau is not None else SINGLE_OP_SEMDEDUP_TAU,
                    "seed": args.master_seed,
                }
            elif selector == MONA_FILTER:
                params = {"fraction": args.mona_fraction or SINGLE_OP_MONA_FRACTION}
            else:
                params = {"fraction": args.fraction or SINGLE_OP_DEFAULT_FRACTION}
            recipe = Recipe((OperatorSpec(selector, params),))
            subset = execute_recipe(recipe, pool, signals)
            step += 1
            evaluate(step, recipe, subset)
    else:
        raise SystemExit(f"unknown baseline suite {args.suite!r}")
    best = history.incumbent()
    print(f"{args.suite}: {step} evaluations, best score {best.score:.6f} "
          f"at step {best.step}")
    return step


def cmd_baseline(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        pool, signals = _load_data(args)
    except (PoolError, OSError) as exc:
        print(f"ingestion failed: {exc}", file=sys.stderr)
        return 1
    catalog = default_catalog(len(pool))
    oracle = _build_oracle(args, pool, out_dir)
    ledger = RunLedger(str(out_dir / "ledger.jsonl"))
    ledger.write({
        "type": "header",
        "run_id": args.run_id or f"baseline-{args.suite}-seed{args.master_seed}",
        "mode": f"baseline:{args.suite}",
        "config": {
            "suite": args.suite, "budget": args.budget,
            "master_seed": args.master_seed, "l_max": args.l_max,
        },
        "catalog_digest": catalog.digest(),
        "pool_digest": pool.content_digest(),
    })
    try:
        _baseline_records(args, pool, signals, catalog, oracle, ledger)
    except (OracleError, ExecutionError) as exc:
        ledger.write({"type": "abort", "error": str(exc)})
        ledger.close()
        print(f"baseline aborted: {exc}", file=sys.stderr)
        return 1
    ledger.close()
    return 0


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

GAP_AREA_NOTE = (
    "gap_area: artifact-defined reconstruction = sum over the window of "
    "(best_so_far(t) - score(t))"
)


def _eval_rows(events: list[dict]) -> list[dict]:
    return [e for e in events if e.get("type") == "eval"]


def _best_so_far(scores: list[float]) -> list[float]:
    best: list[float] = []
    cur = -float("inf")
    for s in scores:
        cur = max(cur, s)
        best.append(cur)
    return best


def gap_area(scores: list[float], start: int, end: int) -> float:
    """Summed positive gap between the running best and each raw score."""
    best = _best_so_far(scores)
    total = 0.0
    for step in range(start, min(end, len(scores)) + 1):
        total += max(0.0, best[step - 1] - scores[step - 1])
    return total


def _tertile_pair_counts(rows: list[dict]) -> list[tuple[str, int, int, int]]:
    """Adjacent-operator pair counts split by score tertile (top vs bottom)."""
    if not rows:
        return []
    ordered = sorted(rows, key=lambda r: (-r["score"], r["step"]))
    cut = max(1, len(rows) // 3)
    counts: dict[str, list[int]] = {}
    for group, slot in ((ordered[:cut], 0), (ordered[-cut:], 1)):
        for row in group:
            ops = [s["operator"] for s in row["recipe"]["steps"]]
            for a, b in set(zip(ops[:-1], ops[1:])):
                counts.setdefault(f"{a}->{b}", [0, 0])[slot] += 1
    out = [(pair, c[0], c[1], c[0] - c[1]) for pair, c in counts.items()]
    out.sort(key=lambda r: (-r[3], r[0]))
    return out


def _state_correlations(rows: list[dict]) -> list[tuple[str, float]]:
    if len(rows) < 3:
        return []
    scores = np.array([r["score"] for r in rows])
    if scores.std() == 0:
        return []
    fields: dict[str, list[float]] = {}
    for row in rows:
        state = row["state"]
        flat = {k: v for k, v in state.items() if k != "score_per_task"}
        for name, value in state.get("score_per_task", {}).items():
            flat[f"score_per_task.{name}"] = value
        for k, v in flat.items():
            fields.setdefault(k, []).append(float(v))
    out = []
    for name in sorted(fields):
        values = np.array(fields[name])
        if values.max() == values.min():
            continue
        rho = stats.spearmanr(values, scores).statistic
        if np.isfinite(rho):
            out.append((name, float(rho)))
    out.sort(key=lambda c: (-abs(c[1]), c[0]))
    return out


def _ledger_summary(path: str, events: list[dict]) -> dict:
    rows = _eval_rows(events)
    scores = [r["score"] for r in rows]
    n = len(scores)
    window_start = min(WARMUP_COUNT + 1, n) if n else 1
    return {
        "ledger": path,
        "records": n,
        "best": max(scores) if scores else float("nan"),
        "mean": float(np.mean(scores)) if scores else float("nan"),
        "best_post_warmup": max(scores[WARMUP_COUNT:]) if n > WARMUP_COUNT else float("nan"),
        "gap_area_post_warmup": gap_area(scores, window_start, n) if scores else 0.0,
        "reseeds": sum(1 for e in events if e.get("type") == "reseed"),
        "assistant_failures": sum(1 for e in events if e.get("type") == "assistant_failure"),
    }


def cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_rows: dict[str, list[dict]] = {}
    summaries = []
    skipped_total = 0
    for path in args.ledgers:
        events, skipped = read_ledger(path)
        skipped_total += skipped
        all_rows[path] = _eval_rows(events)
        summaries.append(_ledger_summary(path, events))

    with open(out_dir / "curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ledger", "step", "score", "best_so_far"])
        for path, rows in all_rows.items():
            best = _best_so_far([r["score"] for r in rows])
            for row, b in zip(rows, best):
                writer.writerow([path, row["step"], row["score"], b])

    with open(out_dir / "scatter.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ledger", "step", "subset_size", "retain_ratio", "score"])
        for path, rows in all_rows.items():
            for row in rows:
                writer.writerow([
                    path, row["step"], row["subset_size"],
                    row["state"]["retain_ratio"], row["score"],
                ])

    with open(out_dir / "motifs.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ledger", "pair", "top_count", "bottom_count", "delta"])
        for path, rows in all_rows.items():
            for pair, top, bottom, delta in _tertile_pair_counts(rows):
                writer.writerow([path, pair, top, bottom, delta])

    with open(out_dir / "state_correlations.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ledger", "field", "spearman"])
        for path, rows in all_rows.items():
            for name, rho in _state_correlations(rows):
                writer.writerow([path, name, rho])

    _write_comparison(out_dir / "comparison.csv", summaries)
    if skipped_total:
        print(f"warning: skipped {skipped_total} corrupt ledger line(s)", file=sys.stderr)
    print(f"reports in {out_dir}")
    return 0


def _write_comparison(path: Path, summaries: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {GAP_AREA_NOTE}\n")
        writer = csv.writer(fh)
        writer.writerow([
            "ledger", "records", "best", "mean", "best_post_warmup",
            "gap_area_post_warmup", "reseeds", "assistant_failures",
        ])
        for s in summaries:
            writer.writerow([
                s["ledger"], s["records"], s["best"], s["mean"],
                s["best_post_warmup"], s["gap_area_post_warmup"],
                s["reseeds"], s["assistant_failures"],
            ])


def cmd_compare(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for path in args.ledgers:
        events, _ = read_ledger(path)
        summaries.append(_ledger_summary(path, events))
    _write_comparison(out_dir / "comparison.csv", summaries)
    for s in summaries:
        print(f"{s['ledger']}: records={s['records']} best={s['best']:.6f} "
              f"mean={s['mean']:.6f} reseeds={s['reseeds']}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recipesearch",
        description="Budgeted search over executable data-curation recipes",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="validate pool and signal files")
    _add_data_args(p)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("exec", help="execute one recipe with explicit seeds")
    _add_data_args(p)
    p.add_argument("--recipe", required=True, help="recipe JSON file")
    p.add_argument("--seeds", type=int, nargs="+",
                   help="seed overrides, one per stochastic step")
    p.add_argument("--out", required=True, help="manifest output path")
    p.add_argument("--state-out", help="state vector output path")
    p.add_argument("--l-max", type=int, default=5)
    p.add_argument("--run-id")
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("run", help="full budgeted search run")
    _add_data_args(p)
    _add_oracle_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--budget", "-B", type=int, default=15)
    p.add_argument("--patience", "-P", type=int, default=4)
    p.add_argument("--candidates", "-M", type=int, default=5)
    p.add_argument("--l-max", type=int, default=5)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--assistant-mode", choices=("fallback", "external"),
                   default="fallback")
    p.add_argument("--assistant-cmd", action="append", metavar="ROLE=CMD",
                   help="external assistant command per role")
    p.add_argument("--random-select", action="store_true",
                   help="ablation: choose candidates uniformly at random")
    p.add_argument("--run-id")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", help="baseline evaluation suites")
    _add_data_args(p)
    _add_oracle_args(p)
    p.add_argument("--suite", required=True,
                   choices=("random_recipe", "random_topk", "single_op"))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--budget", "-B", type=int, default=15)
    p.add_argument("--l-max", type=int, default=5)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--size", type=int, help="random_topk subset size")
    p.add_argument("--fraction", type=float, help="single_op selector fraction")
    p.add_argument("--mona-fraction", type=float,
                   help="single_op per-benchmark relevance fraction")
    p.add_argument("--tau", type=float, help="single_op semdedup threshold")
    p.add_argument("--clusters", type=int, help="single_op semdedup cluster count")
    p.add_argument("--run-id")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="CSV reports from run ledgers")
    p.add_argument("ledgers", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="comparison table across ledgers")
    p.add_argument("ledgers", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
