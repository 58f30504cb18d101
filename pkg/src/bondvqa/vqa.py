"""Sampling-based CVaR variational loop with the NFT sequential optimizer.

One *iteration* is one NFT parameter step (two probe evaluations); iteration 0
is the initial evaluation at ``theta_0``. An *epoch* is a full pass over all
parameter slots in a freshly shuffled order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ansatz import AnsatzCircuit, AnsatzSpec, bind, build
from .portfolio import PenalizedProblem, all_costs, index_to_bits, penalized_costs
from .simulator import MAX_QUBITS, run_bound

DEFAULT_SHOTS = 2 ** 13
# exhaustive cost tables are built up to this many variables
TABLE_MAX_N = 20
DEGENERATE_AMPLITUDE = 1e-12


@dataclass(frozen=True)
class CvarConfig:
    alpha: float = 0.1
    n_shots: int = DEFAULT_SHOTS
    # exact mode aggregates the full output distribution instead of shots
    exact: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.n_shots < 1:
            raise ValueError("n_shots must be >= 1")


def tail_count(n: int, alpha: float) -> int:
    """``ceil(alpha * n)``; products within 1e-9 of an integer are snapped first,
    so representation error in ``alpha`` (0.1 * 10, 2/11 * 11) never adds a sample."""
    x = alpha * n
    nearest = round(x)
    return max(1, nearest if abs(x - nearest) <= 1e-9 else math.ceil(x))


def cvar(costs, alpha: float) -> float:
    """Mean of the lowest ``ceil(alpha * N)`` costs."""
    costs = np.asarray(costs, dtype=float).reshape(-1)
    if costs.size == 0:
        raise ValueError("cvar of an empty sample")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    k = tail_count(costs.size, alpha)
    if k == costs.size:
        return float(costs.mean())
    return float(np.sort(costs)[:k].mean())


def cvar_distribution(costs, probs, alpha: float) -> float:
    """CVaR of a discrete distribution: mean cost over its lowest ``alpha`` probability mass."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    costs = np.asarray(costs, dtype=float)
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()
    if alpha == 1:
        return float(costs @ probs)
    order = np.argsort(costs, kind="stable")
    c, p = costs[order], probs[order]
    before = np.concatenate([[0.0], np.cumsum(p)[:-1]])
    weight = np.clip(alpha - before, 0.0, p)
    return float(c @ weight / alpha)


class CostCache:
    """Penalized cost lookup by bitstring index.

    Small problems get an exhaustive table; larger ones memoize per index.
    A raw cost vector may be supplied instead of a problem (used for
    diagonal observables in tests and exact-mode studies).
    """

    def __init__(self, problem: PenalizedProblem | None = None, table: np.ndarray | None = None):
        if (problem is None) == (table is None):
            raise ValueError("give exactly one of problem or table")
        self.problem = problem
        self.table = None if table is None else np.asarray(table, dtype=float)
        self._memo: dict[int, float] = {}
        if self.table is not None:
            self.n = int(round(math.log2(self.table.size)))
            if 1 << self.n != self.table.size:
                raise ValueError("cost table length must be a power of two")
        else:
            self.n = problem.n
            if self.n <= TABLE_MAX_N:
                self.table = all_costs(problem)

    def __call__(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.table is not None:
            return self.table[indices]
        missing = np.array(sorted({int(i) for i in indices} - self._memo.keys()), dtype=np.int64)
        if missing.size:
            values = penalized_costs(self.problem, index_to_bits(missing, self.n))
            self._memo.update(zip(missing.tolist(), values.tolist()))
        return np.array([self._memo[int(i)] for i in indices])

    def full(self) -> np.ndarray:
        if self.table is None:
            raise ValueError(f"no exhaustive table above {TABLE_MAX_N} variables")
        return self.table


def as_cost_cache(problem) -> CostCache:
    if isinstance(problem, CostCache):
        return problem
    if isinstance(problem, PenalizedProblem):
        return CostCache(problem)
    return CostCache(table=problem)


@dataclass
class SampleSet:
    """Unique sampled bitstring indices with shot counts and costs."""

    indices: np.ndarray
    counts: np.ndarray
    costs: np.ndarray

    @classmethod
    def empty(cls) -> "SampleSet":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))

    @classmethod
    def merge(cls, parts: list["SampleSet"]) -> "SampleSet":
        parts = [p for p in parts if p.indices.size]
        if not parts:
            return cls.empty()
        idx = np.concatenate([p.indices for p in parts])
        cnt = np.concatenate([p.counts for p in parts])
        cost = np.concatenate([p.costs for p in parts])
        uniq, first, inverse = np.unique(idx, return_index=True, return_inverse=True)
        return cls(uniq, np.bincount(inverse, weights=cnt).astype(np.int64), cost[first])

    @property
    def n_shots(self) -> int:
        return int(self.counts.sum())

    def best(self) -> tuple[int, float]:
        k = int(np.argmin(self.costs))
        return int(self.indices[k]), float(self.costs[k])


def evaluate(theta, circuit: AnsatzCircuit, problem, config: CvarConfig, seed=None,
             cutoff: float = 0.0) -> tuple[float, SampleSet]:
    """Run the bound circuit, sample it and aggregate sample costs with CVaR.

    ``seed`` may be an int or a ``numpy.random.Generator`` (consumed in place).
    In exact mode the returned sample set holds the support of the output
    distribution with probabilities scaled to ``n_shots`` in ``counts``
    (rounded) and the CVaR is taken over the exact distribution.
    """
    costs = as_cost_cache(problem)
    if costs.n != circuit.n_qubits:
        raise ValueError(f"problem has {costs.n} variables, circuit {circuit.n_qubits} qubits")
    state = run_bound(bind(circuit, theta, cutoff), circuit.n_qubits)
    probs = state.probabilities()
    if config.exact:
        table = costs.full()
        support = np.flatnonzero(probs > DEGENERATE_AMPLITUDE ** 2)
        value = cvar_distribution(table, probs, config.alpha)
        counts = np.rint(probs[support] * config.n_shots).astype(np.int64)
        return value, SampleSet(support, counts, table[support])
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(probs)
    shots = np.searchsorted(cdf, rng.random(config.n_shots) * cdf[-1], side="right")
    shots = np.minimum(shots, cdf.size - 1)
    uniq, counts = np.unique(shots, return_counts=True)
    unique_costs = costs(uniq)
    value = cvar(np.repeat(unique_costs, counts), config.alpha)
    return value, SampleSet(uniq, counts.astype(np.int64), unique_costs)


def sinusoid_fit(center: float, plus: float, minus: float) -> tuple[float, float, float]:
    """Fit ``a + b*cos(d - c)`` to values at offsets ``d = 0, +pi/2, -pi/2``.

    Returns ``(a, b, c)`` with ``b >= 0``; the minimum lies at ``d = c + pi``.
    """
    a = (plus + minus) / 2
    cos_part = center - a
    sin_part = (plus - minus) / 2
    return a, math.hypot(cos_part, sin_part), math.atan2(sin_part, cos_part)


@dataclass
class StepInfo:
    slot: int
    theta: np.ndarray
    value: float
    probes: tuple[float, ...]
    updated: bool
    evaluations: int


def nft_sweep(theta, objective: Callable[[np.ndarray], float], seed=None,
              center: float | None = None,
              on_step: Callable[[StepInfo], None] | None = None):
    """One NFT epoch: update every slot once, in an order shuffled by ``seed``.

    Each step probes the objective at ``theta_j +- pi/2``, fits a sinusoid
    through those and the current value, and moves ``theta_j`` to the fitted
    minimum (wrapped to ``[0, 2pi)``). After an update the current value is
    the fitted minimum, so only two new evaluations are spent per step; the
    objective at the starting point is evaluated only when ``center`` is not
    supplied. A fit with amplitude below 1e-12 leaves the slot unchanged.

    Returns ``(theta, value, evaluations)``.
    """
    theta = np.array(theta, dtype=float)
    rng = np.random.default_rng(seed)
    evaluations = 0
    if center is None:
        center = float(objective(theta))
        evaluations += 1
    for j in rng.permutation(theta.size):
        j = int(j)
        probe = theta.copy()
        probe[j] = theta[j] + math.pi / 2
        plus = float(objective(probe))
        probe[j] = theta[j] - math.pi / 2
        minus = float(objective(probe))
        evaluations += 2
        a, b, c = sinusoid_fit(center, plus, minus)
        updated = b >= DEGENERATE_AMPLITUDE
        if updated:
            theta[j] = (theta[j] + c + math.pi) % (2 * math.pi)
            center = a - b
        if on_step is not None:
            on_step(StepInfo(j, theta.copy(), center, (plus, minus), updated, evaluations))
    return theta, center, evaluations


@dataclass
class IterationRecord:
    iteration: int
    epoch: int
    # slot updated in this step; None for the initial evaluation
    slot: int | None
    theta: np.ndarray
    # lowest CVaR measured by this iteration's circuit evaluations
    cvar: float
    # optimizer's working value after the step (fitted minimum, not a measurement)
    model_value: float
    probe_cvars: tuple[float, ...]
    best_cost: float
    best_so_far: float
    evaluations: int
    samples: SampleSet | None = None


@dataclass
class RunHistory:
    n_params: int
    records: list[IterationRecord] = field(default_factory=list)
    best_index: int | None = None
    best_cost: float = math.inf
    converged: bool = False

    @property
    def evaluations(self) -> int:
        return self.records[-1].evaluations if self.records else 0

    @property
    def epochs(self) -> int:
        return max((r.epoch for r in self.records), default=0)

    def epoch_ends(self) -> list[int]:
        """Iteration numbers that close an epoch."""
        out = []
        for a, b in zip(self.records, self.records[1:]):
            if b.epoch != a.epoch and a.epoch > 0:
                out.append(a.iteration)
        if self.records and self.records[-1].epoch > 0:
            out.append(self.records[-1].iteration)
        return out

    def samples(self, last_k: int | None = None) -> list[tuple[int, SampleSet]]:
        """``(iteration, samples)`` for the last ``last_k`` iterations (all if None)."""
        recs = self.records if last_k is None else (self.records[-last_k:] if last_k > 0 else [])
        return [(r.iteration, r.samples) for r in recs if r.samples is not None]


@dataclass(frozen=True)
class OptimizerConfig:
    max_epochs: int = 30
    cutoff: float = 0.0
    initial_value: float = math.pi / 3
    # keep sample sets for iteration 0 and the last ``keep_samples`` iterations; None keeps all
    keep_samples: int | None = None

    def __post_init__(self):
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.cutoff < 0:
            raise ValueError("cutoff must be nonnegative")


def run(problem, spec: AnsatzSpec | AnsatzCircuit, cvar_config: CvarConfig,
        optimizer: OptimizerConfig = OptimizerConfig(), seed: int = 0,
        shuffle_seed: int | None = None) -> RunHistory:
    """Full training loop: sample, score with CVaR, update with NFT, repeat.

    ``seed`` drives shot sampling and ``shuffle_seed`` (defaulting to ``seed``)
    the per-epoch parameter order, so either randomness source can be varied
    alone.
    """
    circuit = spec if isinstance(spec, AnsatzCircuit) else build(spec)
    if circuit.n_qubits > MAX_QUBITS:
        raise ValueError(f"{circuit.n_qubits} qubits exceeds the dense simulator limit")
    costs = as_cost_cache(problem)
    sample_rng = np.random.default_rng(seed)
    shuffle_rng = np.random.default_rng(seed if shuffle_seed is None else shuffle_seed)
    history = RunHistory(circuit.n_params)
    pending: list[SampleSet] = []
    probes: list[float] = []
    total = 0

    def objective(theta):
        nonlocal total
        value, samples = evaluate(theta, circuit, costs, cvar_config, sample_rng, optimizer.cutoff)
        total += 1
        pending.append(samples)
        probes.append(value)
        return value

    def record(epoch: int, slot: int | None, theta: np.ndarray, value: float):
        merged = SampleSet.merge(pending)
        idx, best = merged.best() if merged.indices.size else (None, math.inf)
        if best < history.best_cost:
            history.best_cost, history.best_index = best, idx
        history.records.append(IterationRecord(
            iteration=len(history.records),
            epoch=epoch,
            slot=slot,
            theta=theta.copy(),
            cvar=min(probes),
            model_value=value,
            probe_cvars=tuple(probes),
            best_cost=best,
            best_so_far=history.best_cost,
            evaluations=total,
            samples=merged,
        ))
        pending.clear()
        probes.clear()
        keep = optimizer.keep_samples
        if keep is not None and len(history.records) > keep + 1:
            history.records[-keep - 1].samples = None

    theta = np.full(circuit.n_params, optimizer.initial_value)
    value = objective(theta)
    record(0, None, theta, value)
    measured = True

    for epoch in range(1, optimizer.max_epochs + 1):
        start = theta.copy()
        epoch_seed = shuffle_rng.integers(2 ** 63)

        def on_step(info: StepInfo):
            record(epoch, info.slot, info.theta, info.value)

        # re-measure at the epoch start unless theta is still the measured point
        theta, value, _ = nft_sweep(
            theta, objective, epoch_seed, center=value if measured else None, on_step=on_step
        )
        if np.array_equal(theta, start):
            history.converged = True
            break
        measured = False
    return history
