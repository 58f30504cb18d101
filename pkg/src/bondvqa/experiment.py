"""End-to-end experiments: instance generation, training runs, comparisons, run-directory IO."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from pathlib import Path

import numpy as np

from .ansatz import build, make_spec
from .config import ExperimentConfig, save_config
from .portfolio import (
    PortfolioInstance,
    build_instance,
    build_problem,
    index_to_bits,
    is_feasible,
    load_instance,
    save_instance,
)
from .postprocess import (
    BRUTE_FORCE_MAX_N,
    PolishReport,
    brute_force,
    polish_candidates,
    polish_history,
    random_baseline,
    relative_gap,
)
from .simulator import MAX_QUBITS
from .vqa import (
    CostCache,
    CvarConfig,
    IterationRecord,
    OptimizerConfig,
    RunHistory,
    SampleSet,
    run,
)

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ["iteration", "epoch", "slot", "cvar", "model_value", "best_cost",
                   "best_so_far", "evaluations"]
POLISHED_COLUMNS = ["origin_iteration", "raw_cost", "polished_cost", "flips", "evaluations"]
COMPARE_COLUMNS = ["method", "candidates", "evaluations", "best_cost", "mean_cost",
                   "gap_best", "gap_mean"]


def load_or_generate(config: ExperimentConfig) -> PortfolioInstance:
    if config.instance_path:
        return load_instance(config.instance_path)
    return build_instance(config.generator())


def check_size(n: int) -> None:
    if n > MAX_QUBITS:
        raise ValueError(
            f"n={n} exceeds the {MAX_QUBITS}-qubit dense statevector limit; larger circuits need "
            "a matrix-product-state simulator, which this package does not provide"
        )


def cmd_generate(config: ExperimentConfig, out) -> dict:
    instance = build_instance(config.generator())
    problem = build_problem(instance, config.kappa)
    save_instance(instance, out)
    info = {"n": instance.n, "targets": instance.n_targets, "constraints": problem.m}
    print(f"n={info['n']} targets={info['targets']} constraints={info['constraints']} -> {out}")
    return info


def cmd_brute_force(config: ExperimentConfig, out=None) -> dict:
    instance = load_or_generate(config)
    problem = build_problem(instance, config.kappa)
    bits, cost = brute_force(problem)
    info = {
        "n": problem.n,
        "optimal_bits": "".join(map(str, bits.tolist())),
        "optimal_cost": cost,
        "feasible": is_feasible(problem, bits),
    }
    if out:
        Path(out).write_text(json.dumps(info, indent=1) + "\n")
    print(f"n={info['n']} optimum={cost!r} bits={info['optimal_bits']} feasible={info['feasible']}")
    return info


# -- run directory IO --------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def write_history(history: RunHistory, out_dir: Path) -> None:
    rows = [{
        "iteration": r.iteration, "epoch": r.epoch, "slot": r.slot, "cvar": r.cvar,
        "model_value": r.model_value, "best_cost": r.best_cost, "best_so_far": r.best_so_far,
        "evaluations": r.evaluations,
    } for r in history.records]
    write_csv(out_dir / "history.csv", HISTORY_COLUMNS, rows)
    doc = {
        "n_params": history.n_params,
        "converged": history.converged,
        "best_index": history.best_index,
        "best_cost": history.best_cost,
        "records": [
            {**row, "theta": r.theta.tolist(), "probe_cvars": list(r.probe_cvars)}
            for row, r in zip(rows, history.records)
        ],
    }
    (out_dir / "history.json").write_text(json.dumps(doc) + "\n")
    kept = [(r.iteration, r.samples) for r in history.records if r.samples is not None]
    arrays = {
        "iteration": np.concatenate([np.full(s.indices.size, i, np.int64) for i, s in kept]),
        "index": np.concatenate([s.indices for _, s in kept]),
        "count": np.concatenate([s.counts for _, s in kept]),
        "cost": np.concatenate([s.costs for _, s in kept]),
    }
    with open(out_dir / "samples.npz", "wb") as fh:
        np.savez_compressed(fh, **arrays)


def read_history(run_dir) -> RunHistory:
    run_dir = Path(run_dir)
    doc = json.loads((run_dir / "history.json").read_text())
    with np.load(run_dir / "samples.npz") as z:
        it, idx, cnt, cost = z["iteration"], z["index"], z["count"], z["cost"]
    history = RunHistory(doc["n_params"], best_index=doc["best_index"],
                         best_cost=doc["best_cost"], converged=doc["converged"])
    for rec in doc["records"]:
        mask = it == rec["iteration"]
        samples = SampleSet(idx[mask], cnt[mask], cost[mask]) if mask.any() else None
        history.records.append(IterationRecord(
            iteration=rec["iteration"], epoch=rec["epoch"], slot=rec["slot"],
            theta=np.array(rec["theta"]), cvar=rec["cvar"], model_value=rec["model_value"],
            probe_cvars=tuple(rec["probe_cvars"]), best_cost=rec["best_cost"],
            best_so_far=rec["best_so_far"], evaluations=rec["evaluations"], samples=samples,
        ))
    return history


def write_polished(report: PolishReport, path) -> None:
    rows = [{
        "origin_iteration": r.origin_iteration, "raw_cost": r.input_cost,
        "polished_cost": r.output_cost, "flips": r.flips, "evaluations": r.evaluations,
    } for r in report.results]
    write_csv(path, POLISHED_COLUMNS, rows)


def _gap(value: float, optimum: float | None) -> float | None:
    if optimum is None or not math.isfinite(value) or optimum == 0:
        return None
    return relative_gap(value, optimum)


# -- experiments -------------------------------------------------------------

def train(config: ExperimentConfig, instance: PortfolioInstance | None = None):
    """Build the problem and run the variational loop; returns ``(problem, costs, history)``."""
    instance = instance or load_or_generate(config)
    check_size(instance.n)
    problem = build_problem(instance, config.kappa)
    costs = CostCache(problem)
    spec = make_spec(config.ansatz, config.entanglement, config.reps, instance.n)
    history = run(
        costs,
        build(spec),
        CvarConfig(config.alpha, config.n_shots, config.exact),
        OptimizerConfig(config.max_epochs, config.cutoff, config.initial_value),
        seed=config.sampling_seed,
        shuffle_seed=config.shuffle_seed,
    )
    return problem, costs, history


def cmd_run(config: ExperimentConfig, out_dir) -> dict:
    """Train, polish and write the run directory; returns the summary."""
    out_dir = Path(out_dir)
    instance = load_or_generate(config)
    check_size(instance.n)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    problem, costs, history = train(config, instance)
    train_time = time.perf_counter() - start
    polished = polish_history(history, costs, config.polish_last_k, seed=config.search_seed)

    optimum = None
    optimal_bits = None
    if problem.n <= BRUTE_FORCE_MAX_N:
        bits, optimum = brute_force(costs)
        optimal_bits = "".join(map(str, bits.tolist()))

    first = history.records[0]
    summary = {
        "n": problem.n,
        "constraints": problem.m,
        "ansatz": config.ansatz,
        "entanglement": config.entanglement,
        "reps": config.reps,
        "n_params": history.n_params,
        "alpha": config.alpha,
        "n_shots": config.n_shots,
        "iterations": len(history.records) - 1,
        "epochs": history.epochs,
        "converged": history.converged,
        "circuit_evaluations": history.evaluations,
        "initial_cvar": first.cvar,
        "initial_best": first.best_cost,
        "initial_mean": float(first.samples.costs @ first.samples.counts / first.samples.n_shots),
        "optimum": optimum,
        "optimal_bits": optimal_bits,
        "raw_best": history.best_cost,
        "raw_best_bits": "".join(map(str, index_to_bits(history.best_index, problem.n).tolist())),
        "polished_best": polished.best_cost,
        "polished_mean": polished.mean_cost(),
        "polished_candidates": len(polished.results),
        "polish_evaluations": polished.evaluations,
        "gap_raw": _gap(history.best_cost, optimum),
        "gap_polished": _gap(polished.best_cost, optimum),
        "wall_time_s": train_time,
    }

    save_config(config, out_dir / "config.json")
    save_instance(instance, out_dir / "instance.json")
    write_history(history, out_dir)
    write_polished(polished, out_dir / "polished.csv")
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    if config.plots:
        from .plotting import plot_convergence, plot_distributions

        plot_convergence(history, out_dir / "convergence.png", optimum)
        plot_distributions(history, polished, out_dir / "distribution.png", optimum,
                           config.polish_last_k)
    log.info("run written to %s", out_dir)
    print(
        f"n={summary['n']} optimum={optimum!r} raw_best={summary['raw_best']!r} "
        f"polished_best={summary['polished_best']!r} gap_polished={summary['gap_polished']!r} "
        f"evaluations={summary['circuit_evaluations']}"
    )
    return summary


def compare_history(config: ExperimentConfig, problem, history: RunHistory,
                    budget: int | None = None) -> dict:
    """Equal-budget comparison of local search seeded three ways.

    ``trained``: unique samples from the last ``polish_last_k`` iterations;
    ``initial``: unique samples of the untrained circuit (iteration 0);
    ``random``: uniformly random starts. The budget defaults to what the
    trained polishing spent.
    """
    costs = problem if isinstance(problem, CostCache) else CostCache(problem)
    seeds = np.random.SeedSequence(config.search_seed).spawn(2)
    trained = polish_history(history, costs, config.polish_last_k, seed=config.search_seed)
    budget = budget if budget is not None else (config.baseline_budget or trained.evaluations)
    first = history.records[0].samples
    if first is None:
        raise ValueError("history has no samples for iteration 0")
    initial = polish_candidates(first.indices, costs, np.random.default_rng(seeds[0]), budget)
    baseline = random_baseline(costs, seed=np.random.default_rng(seeds[1]), max_evaluations=budget)

    optimum = brute_force(costs)[1] if costs.n <= BRUTE_FORCE_MAX_N else None
    rows = []
    for method, report in (("trained", trained), ("initial", initial)):
        rows.append({
            "method": method,
            "candidates": len(report.results),
            "evaluations": report.evaluations,
            "best_cost": report.best_cost,
            "mean_cost": report.mean_cost(),
        })
    rows.append({
        "method": "random",
        "candidates": baseline.starts,
        "evaluations": baseline.evaluations,
        "best_cost": baseline.best_cost,
        "mean_cost": baseline.mean_cost,
    })
    for row in rows:
        row["gap_best"] = _gap(row["best_cost"], optimum)
        row["gap_mean"] = _gap(row["mean_cost"], optimum)
    return {"budget": budget, "optimum": optimum, "rows": rows}


def cmd_compare(run_dir, budget: int | None = None) -> dict:
    run_dir = Path(run_dir)
    if not (run_dir / "history.json").exists():
        raise FileNotFoundError(f"{run_dir} is not a completed run directory")
    config = ExperimentConfig(**json.loads((run_dir / "config.json").read_text()))
    instance = load_instance(run_dir / "instance.json")
    problem = build_problem(instance, config.kappa)
    report = compare_history(config, problem, read_history(run_dir), budget)
    write_csv(run_dir / "compare.csv", COMPARE_COLUMNS, report["rows"])
    (run_dir / "compare.json").write_text(json.dumps(report, indent=1) + "\n")
    print(",".join(COMPARE_COLUMNS))
    for row in report["rows"]:
        print(",".join(_fmt(row[c]) for c in COMPARE_COLUMNS))
    return report
