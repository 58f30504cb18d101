"""Local-search polishing, brute-force optimum and baselines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .portfolio import PenalizedProblem, all_costs, index_to_bits
from .vqa import CostCache, RunHistory, as_cost_cache

BRUTE_FORCE_MAX_N = 22
# relative slack below which a cost change is not an improvement (float noise)
IMPROVEMENT_TOL = 1e-12


@dataclass(frozen=True)
class PolishResult:
    input_bits: np.ndarray
    output_bits: np.ndarray
    input_cost: float
    output_cost: float
    flips: int
    evaluations: int
    origin_iteration: int | None = None


def _index(x) -> int:
    x = np.asarray(x, dtype=np.int64)
    return int(x @ (np.int64(1) << np.arange(x.size, dtype=np.int64)))


def local_search(x, problem, seed=None, origin_iteration: int | None = None) -> PolishResult:
    """First-improvement 1-flip descent.

    Each scan visits the variables in a fresh random order and accepts the
    first flip that strictly lowers the penalized cost, then starts a new
    scan from there; a scan with no improvement ends the search. Evaluations
    count the starting point plus every neighbour a sequential scan would
    have examined.
    """
    costs = as_cost_cache(problem)
    n = costs.n
    x = np.asarray(x)
    if x.shape != (n,):
        raise ValueError(f"bitstring length {x.shape} does not match n={n}")
    rng = np.random.default_rng(seed)
    current = _index(x)
    current_cost = float(costs(np.array([current]))[0])
    start_cost = current_cost
    flips_mask = np.int64(1) << np.arange(n, dtype=np.int64)
    evaluations = 1
    flips = 0
    while True:
        order = rng.permutation(n)
        neighbour_costs = costs(current ^ flips_mask[order])
        better = np.flatnonzero(
            neighbour_costs < current_cost - IMPROVEMENT_TOL * max(1.0, abs(current_cost))
        )
        if better.size == 0:
            evaluations += n
            break
        k = int(better[0])
        evaluations += k + 1
        current ^= int(flips_mask[order[k]])
        current_cost = float(neighbour_costs[k])
        flips += 1
    return PolishResult(
        input_bits=x.astype(np.uint8),
        output_bits=index_to_bits(current, n),
        input_cost=start_cost,
        output_cost=current_cost,
        flips=flips,
        evaluations=evaluations,
        origin_iteration=origin_iteration,
    )


@dataclass
class PolishReport:
    results: list[PolishResult] = field(default_factory=list)

    @property
    def evaluations(self) -> int:
        return sum(r.evaluations for r in self.results)

    @property
    def best(self) -> PolishResult | None:
        return min(self.results, key=lambda r: r.output_cost, default=None)

    @property
    def best_cost(self) -> float:
        return self.best.output_cost if self.results else float("inf")

    @property
    def best_raw_cost(self) -> float:
        return min((r.input_cost for r in self.results), default=float("inf"))

    def mean_cost(self) -> float:
        return float(np.mean([r.output_cost for r in self.results])) if self.results else float("nan")


def polish_candidates(candidates, problem, seed=None, max_evaluations: int | None = None,
                      origins=None) -> PolishReport:
    """Polish bitstring indices in order, stopping once ``max_evaluations`` is spent.

    A search that starts under budget always runs to completion, so the total
    may overshoot the budget by one search.
    """
    costs = as_cost_cache(problem)
    rng = np.random.default_rng(seed)
    report = PolishReport()
    for k, idx in enumerate(candidates):
        if max_evaluations is not None and report.evaluations >= max_evaluations:
            break
        origin = None if origins is None else origins[k]
        report.results.append(local_search(index_to_bits(int(idx), costs.n), costs, rng, origin))
    return report


def history_candidates(history: RunHistory, last_k: int | None = None):
    """Unique sampled indices in scope, with the first iteration each appeared in."""
    seen: dict[int, int] = {}
    for iteration, samples in history.samples(last_k):
        for idx in samples.indices.tolist():
            seen.setdefault(idx, iteration)
    return list(seen), list(seen.values())


def polish_history(history: RunHistory, problem, last_k: int | None = None, seed=None,
                   max_evaluations: int | None = None) -> PolishReport:
    """Local search from every unique bitstring sampled in the last ``last_k`` iterations."""
    if not history.records:
        raise ValueError("empty run history")
    if last_k is not None and last_k < 0:
        raise ValueError("last_k must be >= 0")
    candidates, origins = history_candidates(history, last_k)
    return polish_candidates(candidates, problem, seed, max_evaluations, origins)


def brute_force(problem) -> tuple[np.ndarray, float]:
    """Exact minimizer of the penalized cost; ties go to the lowest index."""
    n = problem.n if isinstance(problem, (PenalizedProblem, CostCache)) else None
    if n is None:
        raise TypeError("brute_force needs a PenalizedProblem or CostCache")
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    if isinstance(problem, CostCache):
        table = problem.full() if problem.table is not None else all_costs(problem.problem)
    else:
        table = all_costs(problem)
    k = int(np.argmin(table))
    return index_to_bits(k, n), float(table[k])


def relative_gap(found: float, optimum: float) -> float:
    if optimum == 0:
        raise ValueError("relative gap undefined for a zero optimum")
    return abs(found - optimum) / abs(optimum)


@dataclass(frozen=True)
class BaselineResult:
    best_bits: np.ndarray
    best_cost: float
    evaluations: int
    starts: int
    mean_cost: float


def random_baseline(problem, n_starts: int | None = None, seed=None,
                    max_evaluations: int | None = None) -> BaselineResult:
    """Local search from uniformly random starts.

    With ``n_starts >= 2**n`` every bitstring is used once, in random order.
    ``max_evaluations`` caps the budget (starts stop being launched once it
    is reached); at least one of the two limits is required.
    """
    costs = as_cost_cache(problem)
    n = costs.n
    if n_starts is None and max_evaluations is None:
        raise ValueError("give n_starts, max_evaluations or both")
    if n_starts is not None and n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    if max_evaluations is not None and max_evaluations < 1:
        raise ValueError("max_evaluations must be >= 1")
    rng = np.random.default_rng(seed)
    weights = np.int64(1) << np.arange(n, dtype=np.int64)

    def starts():
        if n_starts is not None and n <= 30 and n_starts >= 1 << n:
            yield from rng.permutation(1 << n).tolist()
            return
        drawn = 0
        while n_starts is None or drawn < n_starts:
            yield int(rng.integers(0, 2, size=n) @ weights)
            drawn += 1

    report = polish_candidates(starts(), costs, rng, max_evaluations)
    best = report.best
    return BaselineResult(best.output_bits, best.output_cost, report.evaluations,
                          len(report.results), report.mean_cost())
