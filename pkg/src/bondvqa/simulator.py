"""Dense statevector simulator for the RY / CZ / RYZ / RZY gate set.

Basis index bit ``k`` is qubit ``k`` (little-endian), so ``|q_{n-1} ... q_1 q_0>``
has index ``sum(q_k << k)``. Every supported gate is a real orthogonal matrix in
the computational basis, so amplitudes are stored as float64; the state stays
real throughout. Dense simulation is practical up to about 25 qubits.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 25

PARAMETRIZED = frozenset({"RY", "RYZ", "RZY"})
ARITY = {"RY": 1, "CZ": 2, "RYZ": 2, "RZY": 2}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    # parameter slot id, None for unparametrized gates
    slot: int | None = None

    def __post_init__(self):
        if self.kind not in ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != ARITY[self.kind]:
            raise ValueError(f"{self.kind} acts on {ARITY[self.kind]} qubit(s)")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.kind} operands must be distinct: {self.qubits}")
        if (self.kind in PARAMETRIZED) != (self.slot is not None):
            raise ValueError(f"{self.kind}: slot must be set iff the gate is parametrized")

    @property
    def parametrized(self) -> bool:
        return self.kind in PARAMETRIZED

    def __str__(self) -> str:
        ops = " ".join(map(str, self.qubits))
        return f"{self.kind} {ops}" if self.slot is None else f"{self.kind} {ops} slot={self.slot}"


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ValueError(
                f"{n_qubits} qubits is outside the dense simulator range 1..{MAX_QUBITS}"
            )
        amps = np.zeros(1 << n_qubits)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(self.probabilities().sum()))


def _axis(n: int, q: int) -> int:
    # axis of qubit q in amplitudes.reshape([2] * n)
    return n - 1 - q


def _rotate(psi: np.ndarray, axis: int, theta, where: tuple = ()) -> None:
    """In-place RY on tensor axis ``axis``; ``where`` pins other axes first."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    base = [slice(None)] * psi.ndim
    for ax, bit in where:
        base[ax] = bit
    i0, i1 = list(base), list(base)
    i0[axis], i1[axis] = 0, 1
    i0, i1 = tuple(i0), tuple(i1)
    a0 = psi[i0].copy()
    a1 = psi[i1]
    psi[i0] = c * a0 - s * a1
    psi[i1] = s * a0 + c * a1


def apply_inplace(amps: np.ndarray, n: int, gate: Gate, theta: float | None = None) -> None:
    """Apply ``gate`` to a length-``2**n`` amplitude array without copying."""
    if any(q < 0 or q >= n for q in gate.qubits):
        raise ValueError(f"{gate}: operand out of range for {n} qubits")
    if gate.parametrized and theta is None:
        raise ValueError(f"{gate}: parameter value required")
    psi = amps.reshape((2,) * n)
    if gate.kind == "RY":
        _rotate(psi, _axis(n, gate.qubits[0]), theta)
    elif gate.kind == "CZ":
        idx = [slice(None)] * n
        for q in gate.qubits:
            idx[_axis(n, q)] = 1
        psi[tuple(idx)] *= -1
    else:
        # exp(-i t/2 P(x)Z) with P = Y on one qubit: RY(+t) on it where the
        # Z-qubit reads 0 and RY(-t) where it reads 1
        first, second = gate.qubits
        target, control = (first, second) if gate.kind == "RYZ" else (second, first)
        ax_t, ax_c = _axis(n, target), _axis(n, control)
        _rotate(psi, ax_t, theta, where=((ax_c, 0),))
        _rotate(psi, ax_t, -theta, where=((ax_c, 1),))


def apply_gate(state: StateVector, gate: Gate, theta: float | None = None) -> StateVector:
    out = state.copy()
    apply_inplace(out.amplitudes, out.n_qubits, gate, theta)
    return out


def _ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


_EYE2 = np.eye(2)


def _kron_block(mats: dict[int, np.ndarray], qubits: range) -> np.ndarray | None:
    if not any(q in mats for q in qubits):
        return None
    out = np.ones((1, 1))
    for q in reversed(qubits):
        m = mats.get(q, _EYE2)
        r = out.shape[0]
        out = (out[:, None, :, None] * m[None, :, None, :]).reshape(2 * r, 2 * r)
    return out


def _apply_ry_run(amps: np.ndarray, n: int, mats: dict[int, np.ndarray], block: int = 4) -> None:
    # a run of RY gates is a tensor product: apply it block by block, most
    # significant block first, rotating that block to the least significant
    # position each time so all blocks end where they started
    psi = amps
    for hi in range(n, 0, -block):
        qubits = range(max(0, hi - block), hi)
        width = 1 << len(qubits)
        m = _kron_block(mats, qubits)
        lead = psi.reshape(width, -1)
        psi = (lead if m is None else m @ lead).T
    amps[:] = psi.reshape(-1)


@lru_cache(maxsize=64)
def _cz_signs(n: int, pairs: tuple[tuple[int, int], ...]) -> np.ndarray:
    idx = np.arange(1 << n)
    parity = np.zeros(1 << n, dtype=np.int64)
    for a, b in pairs:
        parity ^= (idx >> a) & (idx >> b) & 1
    signs = 1.0 - 2.0 * parity
    signs.setflags(write=False)
    return signs


def run_bound(sequence: Iterable[tuple[Gate, float | None]], n_qubits: int) -> StateVector:
    """Apply ``(gate, angle)`` pairs in order to ``|0...0>``.

    Consecutive RY gates and consecutive CZ gates each commute within their
    run, so runs are applied in one pass (a tensor-product matmul and a sign
    mask respectively); the result equals gate-by-gate application.
    """
    state = StateVector.zero(n_qubits)
    amps = state.amplitudes
    ry_run: dict[int, np.ndarray] = {}
    cz_run: list[tuple[int, int]] = []

    def flush():
        if ry_run:
            _apply_ry_run(amps, n_qubits, ry_run)
            ry_run.clear()
        if cz_run:
            np.multiply(amps, _cz_signs(n_qubits, tuple(cz_run)), out=amps)
            cz_run.clear()

    for gate, theta in sequence:
        if any(q < 0 or q >= n_qubits for q in gate.qubits):
            raise ValueError(f"{gate}: operand out of range for {n_qubits} qubits")
        if gate.kind == "RY" and n_qubits >= 4:
            if cz_run:
                flush()
            if theta is None:
                raise ValueError(f"{gate}: parameter value required")
            q = gate.qubits[0]
            m = _ry_matrix(theta)
            ry_run[q] = m @ ry_run[q] if q in ry_run else m
        elif gate.kind == "CZ" and n_qubits >= 4:
            if ry_run:
                flush()
            cz_run.append(gate.qubits)
        else:
            flush()
            apply_inplace(amps, n_qubits, gate, theta)
    flush()
    return state


def run_circuit(circuit: Sequence[Gate], theta: Sequence[float], n_qubits: int) -> StateVector:
    theta = np.asarray(theta, dtype=float)
    sequence = []
    for gate in circuit:
        if gate.parametrized:
            if not 0 <= gate.slot < len(theta):
                raise ValueError(f"{gate}: slot {gate.slot} unbound (have {len(theta)} values)")
            sequence.append((gate, float(theta[gate.slot])))
        else:
            sequence.append((gate, None))
    return run_bound(sequence, n_qubits)


def sample_indices(state: StateVector, n_shots: int, seed=None) -> np.ndarray:
    """Draw basis-state indices i.i.d. from ``|amplitude|**2``."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(state.probabilities())
    draws = rng.random(n_shots) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, draws, side="right"), cdf.size - 1)


def sample(state: StateVector, n_shots: int, seed=None) -> np.ndarray:
    """Sampled bitstrings as an ``(n_shots, n_qubits)`` 0/1 array (column k = qubit k)."""
    idx = sample_indices(state, n_shots, seed)
    return ((idx[:, None] >> np.arange(state.n_qubits)) & 1).astype(np.uint8)


def circuit_to_text(circuit: Sequence[Gate], theta: Sequence[float] | None = None) -> str:
    """One gate per line; bound angles appended when ``theta`` is given."""
    lines = []
    for g in circuit:
        line = str(g)
        if theta is not None and g.parametrized:
            line += f" theta={float(theta[g.slot])!r}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")


def circuit_from_text(text: str) -> list[Gate]:
    gates = []
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        slot = None
        qubits = []
        for p in parts[1:]:
            if p.startswith("slot="):
                slot = int(p[5:])
            elif not p.startswith("theta="):
                qubits.append(int(p))
        gates.append(Gate(parts[0], tuple(qubits), slot))
    return gates
