"""Bond portfolio construction problem, its binary matrix form and penalized cost.

Bitstrings are 0/1 numpy vectors ``x`` of length ``n``; bond ``i`` is held at
its fixed quantity ``c_i * delta_i`` when ``x[i] == 1``.  The integer index of
a bitstring is ``sum(x[k] << k)``, i.e. bit ``k`` of the index is variable
``k`` (the same convention the simulator uses for qubit ``k``).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

FORMAT_VERSION = 1

# generated data lives on a 0.01 grid; constraint bounds sit half a step off it
GRID = 0.01


@dataclass(frozen=True)
class Bond:
    id: int
    lot_size: float
    lot_count: int
    price: float
    # class id per dimension, indexed by dimension
    classes: tuple[int, ...]
    # metric_weights[dimension][metric]
    metric_weights: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.lot_size > 0:
            raise ValueError(f"bond {self.id}: lot size must be positive")
        if self.lot_count < 1:
            raise ValueError(f"bond {self.id}: lot count must be >= 1")
        if not self.price > 0:
            raise ValueError(f"bond {self.id}: price must be positive")
        if len(self.metric_weights) != len(self.classes):
            raise ValueError(f"bond {self.id}: one weight row per dimension required")

    @property
    def quantity(self) -> float:
        """Held quantity ``c_i * delta_i`` when the bond is selected."""
        return self.lot_count * self.lot_size


@dataclass(frozen=True)
class PortfolioInstance:
    bonds: tuple[Bond, ...]
    classes_per_dimension: tuple[int, ...]
    metrics: tuple[str, ...]
    # targets[dimension][class][metric]
    targets: tuple[tuple[tuple[float, ...], ...], ...]
    # guardrails[dimension][class][metric]; None where no guardrail is set
    guardrails: tuple[tuple[tuple[float | None, ...], ...], ...]
    budget: float
    generator: dict[str, Any] | None = field(default=None, compare=True)

    def __post_init__(self):
        n_dims = len(self.classes_per_dimension)
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if any(k < 1 for k in self.classes_per_dimension):
            raise ValueError("every dimension needs at least one class")
        if len(self.targets) != n_dims or len(self.guardrails) != n_dims:
            raise ValueError("targets/guardrails must cover every dimension")
        J = len(self.metrics)
        for D, k in enumerate(self.classes_per_dimension):
            if len(self.targets[D]) != k or any(len(t) != J for t in self.targets[D]):
                raise ValueError(f"dimension {D}: need one target per (class, metric)")
            if len(self.guardrails[D]) != k or any(len(g) != J for g in self.guardrails[D]):
                raise ValueError(f"dimension {D}: guardrail table has wrong shape")
            for row in self.guardrails[D]:
                if any(e is not None and e < 0 for e in row):
                    raise ValueError("guardrail widths must be nonnegative")
            counts = [0] * k
            for b in self.bonds:
                if len(b.classes) != n_dims:
                    raise ValueError(f"bond {b.id}: needs exactly one class per dimension")
                if not 0 <= b.classes[D] < k:
                    raise ValueError(f"bond {b.id}: class {b.classes[D]} out of range")
                if len(b.metric_weights[D]) != J:
                    raise ValueError(f"bond {b.id}: needs one weight per metric")
                counts[b.classes[D]] += 1
            if min(counts) == 0:
                raise ValueError(f"dimension {D}: every class needs at least one bond")

    @property
    def n(self) -> int:
        return len(self.bonds)

    @property
    def n_classes(self) -> int:
        return sum(self.classes_per_dimension)

    @property
    def n_targets(self) -> int:
        return self.n_classes * len(self.metrics)

    def class_rows(self):
        """Yield ``(D, d, j, coeffs)`` for every (class, metric) pair.

        ``coeffs[i]`` is ``w_{i,D,j} * delta_i * c_i`` for bonds in class ``d``
        of dimension ``D`` and zero elsewhere.
        """
        for D, k in enumerate(self.classes_per_dimension):
            for d in range(k):
                for j in range(len(self.metrics)):
                    coeffs = np.array([
                        b.metric_weights[D][j] * b.quantity if b.classes[D] == d else 0.0
                        for b in self.bonds
                    ])
                    yield D, d, j, coeffs

    def cash_coefficients(self) -> np.ndarray:
        return np.array([b.price * b.quantity for b in self.bonds])


@dataclass(frozen=True, eq=False)
class PenalizedProblem:
    """Matrix form ``constant + x^T Q x`` subject to ``A x <= b``.

    Linear terms are folded onto ``diag(Q)`` (valid since ``x_i**2 == x_i``).
    ``scales`` is ``None`` until :func:`choose_penalty_scales` sets it.
    """

    Q: np.ndarray
    constant: float
    A: np.ndarray
    b: np.ndarray
    scales: np.ndarray | None = None

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        A = np.array(self.A, dtype=float).reshape(-1, Q.shape[0])
        b = np.array(self.b, dtype=float).reshape(-1)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not np.array_equal(Q, Q.T):
            raise ValueError("Q must be symmetric")
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b disagree on the constraint count")
        arrays = {"Q": Q, "A": A, "b": b}
        if self.scales is not None:
            s = np.array(self.scales, dtype=float).reshape(-1)
            if s.shape != b.shape:
                raise ValueError("one penalty scale per constraint required")
            if not (np.all(np.isfinite(s)) and np.all(s > 0)):
                raise ValueError("penalty scales must be finite and positive")
            arrays["scales"] = s
        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def with_scales(self, scales) -> "PenalizedProblem":
        return replace(self, scales=np.asarray(scales, dtype=float))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "n": self.n,
            "m": self.m,
            "Q": self.Q.reshape(-1).tolist(),
            "constant": self.constant,
            "A": self.A.reshape(-1).tolist(),
            "b": self.b.tolist(),
            "scales": None if self.scales is None else self.scales.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PenalizedProblem":
        n, m = data["n"], data["m"]
        return cls(
            Q=np.array(data["Q"], dtype=float).reshape(n, n),
            constant=data["constant"],
            A=np.array(data["A"], dtype=float).reshape(m, n),
            b=np.array(data["b"], dtype=float),
            scales=data.get("scales"),
        )


@dataclass(frozen=True)
class GeneratorConfig:
    n_bonds: int = 16
    classes_per_dimension: tuple[int, ...] = (3, 2)
    n_metrics: int = 2
    seed: int = 0
    guardrail_fraction: float = 0.5
    # target noise as a fraction of each class metric at the reference portfolio
    noise: float = 0.1
    # guardrail half-width on top of the target noise, same relative units
    guardrail_width: float = 0.1
    # budget headroom over the reference portfolio's cash
    budget_slack: float = 0.02
    reference_density: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "classes_per_dimension", tuple(int(k) for k in self.classes_per_dimension))


def _snap(v: float) -> float:
    return round(round(v / GRID) * GRID, 10)


def build_instance(config: GeneratorConfig) -> PortfolioInstance:
    """Generate a seeded synthetic bond universe with a feasible hidden portfolio.

    Targets are the hidden portfolio's class metrics plus noise, the budget is
    its cash plus headroom, and guardrails are wide enough to contain it, so at
    least that portfolio satisfies every constraint.
    """
    n = config.n_bonds
    if n < 2:
        raise ValueError("need at least 2 bonds")
    if not config.classes_per_dimension or any(k < 1 for k in config.classes_per_dimension):
        raise ValueError("every dimension needs at least one class")
    if max(config.classes_per_dimension) > n:
        raise ValueError("more classes than bonds: some class would be empty")
    if config.n_metrics < 1:
        raise ValueError("need at least one metric")

    rng = np.random.default_rng(config.seed)
    n_dims = len(config.classes_per_dimension)
    J = config.n_metrics

    memberships = []
    for k in config.classes_per_dimension:
        # every class gets one bond, the rest are assigned at random
        labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
        memberships.append(rng.permutation(labels))

    bonds = []
    for i in range(n):
        weights = tuple(
            tuple(_snap(w) for w in rng.uniform(0.5, 1.5, size=J)) for _ in range(n_dims)
        )
        bonds.append(Bond(
            id=i,
            lot_size=float(rng.choice([1.0, 2.0, 5.0])),
            lot_count=int(rng.integers(1, 4)),
            price=_snap(rng.uniform(0.9, 1.1)),
            classes=tuple(int(memberships[D][i]) for D in range(n_dims)),
            metric_weights=weights,
        ))

    reference = (rng.random(n) < config.reference_density).astype(float)
    if reference.sum() == 0:
        reference[rng.integers(n)] = 1.0

    targets, guardrails = [], []
    for D, k in enumerate(config.classes_per_dimension):
        t_dim, g_dim = [], []
        for d in range(k):
            t_row, g_row = [], []
            members = [b for b in bonds if b.classes[D] == d]
            for j in range(J):
                level = sum(b.metric_weights[D][j] * b.quantity * reference[b.id] for b in members)
                scale = max(level, sum(b.metric_weights[D][j] * b.quantity for b in members) / 2)
                noise = config.noise * scale * rng.standard_normal()
                target = _snap(level + noise)
                t_row.append(target)
                if rng.random() < config.guardrail_fraction:
                    # |target - level| <= |noise| + GRID/2 < width, so the reference stays inside
                    width = _snap(abs(target - level) + config.guardrail_width * scale) + GRID / 2
                    g_row.append(round(width, 10))
                else:
                    g_row.append(None)
            t_dim.append(tuple(t_row))
            g_dim.append(tuple(g_row))
        targets.append(tuple(t_dim))
        guardrails.append(tuple(g_dim))

    cash = sum(b.price * b.quantity * reference[b.id] for b in bonds)
    budget = round(_snap(cash * (1 + config.budget_slack)) + GRID / 2, 10)

    generator = asdict(config)
    generator["classes_per_dimension"] = list(config.classes_per_dimension)
    return PortfolioInstance(
        bonds=tuple(bonds),
        classes_per_dimension=config.classes_per_dimension,
        metrics=tuple(f"metric_{j}" for j in range(J)),
        targets=tuple(targets),
        guardrails=tuple(guardrails),
        budget=budget,
        generator=generator,
    )


def _as_bits(x, n: int) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (n,):
        raise ValueError(f"bitstring length {x.shape} does not match n={n}")
    return x.astype(float)


def objective_cost(instance: PortfolioInstance, x) -> float:
    """Sum of squared distances between class metrics and their targets."""
    x = _as_bits(x, instance.n)
    total = 0.0
    for D, d, j, coeffs in instance.class_rows():
        total += (instance.targets[D][d][j] - coeffs @ x) ** 2
    return float(total)


def to_matrix_form(instance: PortfolioInstance) -> PenalizedProblem:
    """Expand the objective into ``constant + x^T Q x`` and collect ``A x <= b``.

    Row 0 of ``A`` is the budget; each guardrail then contributes an upper
    row ``a.x <= tau + eps`` followed by a lower row ``-a.x <= -(tau - eps)``.
    """
    n = instance.n
    Q = np.zeros((n, n))
    linear = np.zeros(n)
    constant = 0.0
    rows = [instance.cash_coefficients()]
    rhs = [instance.budget]
    for D, d, j, coeffs in instance.class_rows():
        tau = instance.targets[D][d][j]
        Q += np.outer(coeffs, coeffs)
        linear -= 2.0 * tau * coeffs
        constant += tau * tau
        eps = instance.guardrails[D][d][j]
        if eps is not None:
            rows.append(coeffs)
            rhs.append(tau + eps)
            rows.append(-coeffs)
            rhs.append(-(tau - eps))
    Q[np.diag_indices(n)] += linear
    Q = (Q + Q.T) / 2
    return PenalizedProblem(Q=Q, constant=constant, A=np.array(rows), b=np.array(rhs))


def choose_penalty_scales(problem: PenalizedProblem, kappa: float = 10.0) -> PenalizedProblem:
    """Set ``s_j = kappa * B / v_j`` with ``B = sum|Q|`` and ``v_j`` the smallest nonzero ``|A_jk|``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    bound = float(np.abs(problem.Q).sum())
    if bound == 0.0:
        # constant objective: any positive scale separates feasible from infeasible
        bound = 1.0
    scales = np.empty(problem.m)
    for j in range(problem.m):
        nonzero = np.abs(problem.A[j][problem.A[j] != 0])
        if nonzero.size == 0:
            if problem.b[j] < 0:
                raise ValueError(f"constraint {j} is 0 <= {problem.b[j]}: unsatisfiable")
            scales[j] = kappa * bound
        else:
            scales[j] = kappa * bound / nonzero.min()
    return problem.with_scales(scales)


def quadratic_costs(problem: PenalizedProblem, X: np.ndarray) -> np.ndarray:
    """``constant + x^T Q x`` for every row of ``X``."""
    X = np.asarray(X, dtype=float)
    return problem.constant + np.einsum("ij,ij->i", X @ problem.Q, X)


def violations(problem: PenalizedProblem, X: np.ndarray) -> np.ndarray:
    """``A x - b`` for every row of ``X`` (shape ``(rows, m)``)."""
    return np.asarray(X, dtype=float) @ problem.A.T - problem.b


def penalized_costs(problem: PenalizedProblem, X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`penalized_cost` over the rows of ``X``."""
    if problem.scales is None:
        raise ValueError("penalty scales not set; call choose_penalty_scales first")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != problem.n:
        raise ValueError(f"bitstring length {X.shape[1]} does not match n={problem.n}")
    penalty = np.maximum(0.0, violations(problem, X) * problem.scales).sum(axis=1)
    return quadratic_costs(problem, X) + penalty


def penalized_cost(problem: PenalizedProblem, x) -> float:
    x = _as_bits(x, problem.n)
    return float(penalized_costs(problem, x[None, :])[0])


def is_feasible(problem: PenalizedProblem, x) -> bool:
    x = _as_bits(x, problem.n)
    return bool(np.all(violations(problem, x[None, :]) <= 0))


def index_to_bits(index, n: int) -> np.ndarray:
    """Integer index (or array of indices) to 0/1 rows, bit k -> column k."""
    index = np.asarray(index, dtype=np.int64)
    return ((index[..., None] >> np.arange(n)) & 1).astype(np.uint8)


def bits_to_index(x) -> int | np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    weights = np.int64(1) << np.arange(x.shape[-1], dtype=np.int64)
    out = x @ weights
    return int(out) if np.ndim(out) == 0 else out


def all_costs(problem: PenalizedProblem, chunk: int = 1 << 16) -> np.ndarray:
    """Penalized cost of every bitstring, ordered by integer index."""
    n = problem.n
    out = np.empty(1 << n)
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n))
        out[idx] = penalized_costs(problem, index_to_bits(idx, n))
    return out


# -- serialization -----------------------------------------------------------

def instance_to_dict(instance: PortfolioInstance) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "budget": instance.budget,
        "classes_per_dimension": list(instance.classes_per_dimension),
        "metrics": list(instance.metrics),
        "targets": [[list(r) for r in dim] for dim in instance.targets],
        "guardrails": [[list(r) for r in dim] for dim in instance.guardrails],
        "bonds": [
            {
                "id": b.id,
                "lot_size": b.lot_size,
                "lot_count": b.lot_count,
                "price": b.price,
                "classes": list(b.classes),
                "metric_weights": [list(r) for r in b.metric_weights],
            }
            for b in instance.bonds
        ],
        "generator": instance.generator,
    }


def instance_from_dict(data: dict) -> PortfolioInstance:
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported instance format {data.get('format_version')!r}")
    return PortfolioInstance(
        bonds=tuple(
            Bond(
                id=b["id"],
                lot_size=b["lot_size"],
                lot_count=b["lot_count"],
                price=b["price"],
                classes=tuple(b["classes"]),
                metric_weights=tuple(tuple(r) for r in b["metric_weights"]),
            )
            for b in data["bonds"]
        ),
        classes_per_dimension=tuple(data["classes_per_dimension"]),
        metrics=tuple(data["metrics"]),
        targets=tuple(tuple(tuple(r) for r in dim) for dim in data["targets"]),
        guardrails=tuple(tuple(tuple(r) for r in dim) for dim in data["guardrails"]),
        budget=data["budget"],
        generator=data.get("generator"),
    )


def save_instance(instance: PortfolioInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n")


def load_instance(path) -> PortfolioInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def build_problem(instance: PortfolioInstance, kappa: float = 10.0) -> PenalizedProblem:
    """Matrix form with penalty scales set; the usual entry point for solvers."""
    return choose_penalty_scales(to_matrix_form(instance), kappa)


def problem_scale(problem: PenalizedProblem) -> float:
    return max(1.0, abs(problem.constant), float(np.abs(problem.Q).sum()))

