"""TwoLocal and BFCD parametrized circuits over bilinear or colored entanglement."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .simulator import Gate
from .topology import CouplingGraph, bilinear_layers, color_layers, device_graph, line_graph

FAMILIES = ("twolocal", "bfcd")
ENTANGLEMENTS = ("bilinear", "color")


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    entanglement: CouplingGraph
    reps: int
    n_qubits: int
    # "bilinear" orders a line graph by pair parity; "color" groups by edge color
    layout: str = "color"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown ansatz family {self.family!r}")
        if self.layout not in ENTANGLEMENTS:
            raise ValueError(f"unknown entanglement layout {self.layout!r}")
        if self.reps < 1:
            raise ValueError("repetitions must be >= 1")
        if self.entanglement.node_count != self.n_qubits:
            raise ValueError(
                f"entanglement graph has {self.entanglement.node_count} nodes, "
                f"expected {self.n_qubits}"
            )
        if self.layout == "bilinear" and set(self.entanglement.edges) != set(
            line_graph(self.n_qubits).edges
        ):
            raise ValueError("bilinear entanglement needs a line graph")


def make_spec(family: str, entanglement: str, reps: int, n_qubits: int) -> AnsatzSpec:
    """Spec from CLI-style names: ``bilinear`` uses a line, ``color`` a trimmed heavy-hex."""
    if entanglement == "bilinear":
        graph = line_graph(n_qubits)
    elif entanglement == "color":
        graph = device_graph(n_qubits)
    else:
        raise ValueError(f"unknown entanglement {entanglement!r}")
    return AnsatzSpec(family, graph, reps, n_qubits, layout=entanglement)


@dataclass(frozen=True)
class AnsatzCircuit:
    gates: tuple[Gate, ...]
    n_qubits: int
    n_params: int

    @property
    def slot_multiplicity(self) -> dict[int, int]:
        return dict(Counter(g.slot for g in self.gates if g.parametrized))

    def gates_for_slot(self, slot: int) -> list[int]:
        return [k for k, g in enumerate(self.gates) if g.slot == slot]

    def counts(self) -> dict[str, int]:
        """Pre-transpilation gate statistics."""
        two = sum(1 for g in self.gates if len(g.qubits) == 2)
        return {
            "params": self.n_params,
            "gates": len(self.gates),
            "two_qubit_gates": two,
            "depth": circuit_depth(self.gates, self.n_qubits),
        }


def circuit_depth(gates: Sequence[Gate], n_qubits: int) -> int:
    level = [0] * n_qubits
    for g in gates:
        d = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = d
    return max(level, default=0)


def _entangling_pairs(spec: AnsatzSpec) -> list[tuple[int, int]]:
    if spec.layout == "bilinear":
        layers = bilinear_layers(spec.n_qubits)
    else:
        layers = color_layers(spec.entanglement)
    return [pair for layer in layers for pair in layer]


def build(spec: AnsatzSpec) -> AnsatzCircuit:
    """Lay out the gate list and assign parameter slots in gate order.

    TwoLocal: an RY layer, then ``reps`` times (CZ layer, RY layer).
    BFCD: ``reps`` times (RY layer, one RYZ+RZY pair per edge sharing a slot);
    there is no trailing rotation layer.
    """
    n = spec.n_qubits
    pairs = _entangling_pairs(spec)
    gates: list[Gate] = []
    slot = 0

    def ry_layer():
        nonlocal slot
        for q in range(n):
            gates.append(Gate("RY", (q,), slot))
            slot += 1

    if spec.family == "twolocal":
        ry_layer()
        for _ in range(spec.reps):
            gates.extend(Gate("CZ", p) for p in pairs)
            ry_layer()
    else:
        for _ in range(spec.reps):
            ry_layer()
            for p in pairs:
                gates.append(Gate("RYZ", p, slot))
                gates.append(Gate("RZY", p, slot))
                slot += 1
    return AnsatzCircuit(tuple(gates), n, slot)


def bind(circuit: AnsatzCircuit, theta, cutoff: float = 0.0) -> list[tuple[Gate, float | None]]:
    """Executable ``(gate, angle)`` list; parametrized gates with ``|angle| < cutoff`` are dropped."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got {theta.shape}")
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    out = []
    for g in circuit.gates:
        if not g.parametrized:
            out.append((g, None))
            continue
        value = float(theta[g.slot])
        if abs(value) >= cutoff:
            out.append((g, value))
    return out
