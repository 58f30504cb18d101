import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from bondvqa.simulator import (
    Gate,
    StateVector,
    apply_gate,
    circuit_from_text,
    circuit_to_text,
    run_bound,
    run_circuit,
    sample,
    sample_indices,
)

from oracles import dense_state, gate_matrix, kron_state, pauli_string, taylor_expm


def random_sequence(rng, n, n_gates):
    seq = []
    for _ in range(n_gates):
        kind = rng.choice(["RY", "CZ", "RYZ", "RZY"]) if n > 1 else "RY"
        if kind == "RY":
            seq.append((Gate("RY", (int(rng.integers(n)),), 0), float(rng.uniform(-7, 7))))
        else:
            a, b = rng.choice(n, size=2, replace=False)
            if kind == "CZ":
                seq.append((Gate("CZ", (int(a), int(b))), None))
            else:
                seq.append((Gate(kind, (int(a), int(b)), 0), float(rng.uniform(-7, 7))))
    return seq


def test_ry_pi_flips_zero_to_one():
    out = apply_gate(StateVector.zero(1), Gate("RY", (0,), 0), math.pi)
    np.testing.assert_allclose(out.amplitudes, [0.0, 1.0], atol=1e-15)


def test_cz_marks_both_ones():
    bell = StateVector(2, np.array([1, 0, 0, 1]) / math.sqrt(2))
    out = apply_gate(bell, Gate("CZ", (0, 1)))
    np.testing.assert_allclose(out.amplitudes, np.array([1, 0, 0, -1]) / math.sqrt(2))


@pytest.mark.parametrize("theta", [0.3, 1.7, -2.2])
def test_rzy_on_zero_matches_taylor_exponential(theta):
    # Z on qubit 0 and Y on qubit 1: from |00> the Y rotation moves weight to qubit 1
    out = apply_gate(StateVector.zero(2), Gate("RZY", (0, 1), 0), theta)
    generator = -0.5j * theta * pauli_string(2, {0: "Z", 1: "Y"})
    expected = taylor_expm(generator)[:, 0]
    np.testing.assert_allclose(out.amplitudes, expected.real, atol=1e-14)
    assert np.max(np.abs(expected.imag)) < 1e-14
    np.testing.assert_allclose(out.amplitudes, [math.cos(theta / 2), 0, math.sin(theta / 2), 0],
                               atol=1e-15)


@pytest.mark.parametrize("kind", ["RY", "CZ", "RYZ", "RZY"])
def test_each_gate_matches_dense_oracle_on_random_state(kind):
    rng = np.random.default_rng(3)
    n = 4
    psi = rng.standard_normal(1 << n)
    psi /= np.linalg.norm(psi)
    qubits = (2,) if kind == "RY" else (3, 1)
    gate = Gate(kind, qubits, None if kind == "CZ" else 0)
    theta = None if kind == "CZ" else 0.81
    out = apply_gate(StateVector(n, psi), gate, theta)
    np.testing.assert_allclose(out.amplitudes, gate_matrix(n, kind, qubits, theta) @ psi,
                               atol=1e-14)


def test_empty_circuit_is_all_zero_state():
    out = run_circuit([], [], 5)
    assert out.amplitudes[0] == 1.0 and np.count_nonzero(out.amplitudes) == 1


@pytest.mark.parametrize("seed", range(10))
def test_random_circuits_match_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    seq = random_sequence(rng, n, int(rng.integers(1, 120)))
    got = run_bound(seq, n).amplitudes
    assert np.max(np.abs(got - dense_state(n, seq))) <= 1e-10


def test_fused_layers_match_gate_by_gate():
    # RY and CZ runs take the fused path at n >= 4
    rng = np.random.default_rng(11)
    n = 9
    seq = [(Gate("RY", (q,), 0), float(rng.uniform(-3, 3))) for q in range(n)]
    seq += [(Gate("CZ", (q, q + 1)), None) for q in range(n - 1)]
    seq += [(Gate("RY", (q,), 0), float(rng.uniform(-3, 3))) for q in reversed(range(n))]
    seq += [(Gate("RYZ", (0, 5), 0), 0.4), (Gate("RY", (5,), 0), 1.1), (Gate("RY", (5,), 0), 0.2)]
    amps = StateVector.zero(n).amplitudes
    for gate, theta in seq:
        amps = apply_gate(StateVector(n, amps), gate, theta).amplitudes
    np.testing.assert_allclose(run_bound(seq, n).amplitudes, amps, atol=1e-14)


def test_disjoint_rotations_commute():
    seq = [(Gate("RY", (q,), 0), 0.3 * (q + 1)) for q in range(5)]
    a = run_bound(seq, 5).amplitudes
    b = run_bound(list(reversed(seq)), 5).amplitudes
    np.testing.assert_allclose(a, b, atol=1e-15)


@pytest.mark.parametrize("pair", [(0, 1), (2, 0)])
def test_ryz_and_rzy_on_same_pair_commute(pair):
    rng = np.random.default_rng(4)
    prep = [(Gate("RY", (q,), 0), float(rng.uniform(0, 6))) for q in range(3)]
    ryz = (Gate("RYZ", pair, 0), 0.7)
    rzy = (Gate("RZY", pair, 0), -1.9)
    a = run_bound(prep + [ryz, rzy], 3).amplitudes
    b = run_bound(prep + [rzy, ryz], 3).amplitudes
    assert np.max(np.abs(a - b)) <= 1e-12


def test_norm_drift_over_long_circuit():
    rng = np.random.default_rng(0)
    n = 14
    seq = random_sequence(rng, n, 10_000)
    assert abs(run_bound(seq, n).norm() - 1.0) <= 1e-10


def test_unbound_slot_and_bad_operands():
    with pytest.raises(ValueError, match="unbound"):
        run_circuit([Gate("RY", (0,), 3)], [0.1, 0.2], 2)
    with pytest.raises(ValueError):
        run_circuit([Gate("CZ", (0, 4))], [], 3)
    with pytest.raises(ValueError):
        Gate("CZ", (1, 1))
    with pytest.raises(ValueError):
        Gate("RY", (0,))
    with pytest.raises(ValueError):
        Gate("CX", (0, 1))
    with pytest.raises(ValueError):
        StateVector.zero(26)


def test_basis_state_always_sampled():
    amps = np.zeros(8)
    amps[0b101] = 1.0
    shots = sample(StateVector(3, amps), 500, seed=0)
    assert np.all(shots == [1, 0, 1])


def test_plus_state_ones_within_five_sigma():
    plus = StateVector(1, np.array([1.0, 1.0]) / math.sqrt(2))
    n_shots = 2 ** 13
    ones = int(sample(plus, n_shots, seed=2).sum())
    assert abs(ones - n_shots / 2) <= 5 * math.sqrt(n_shots / 4)


def test_sampling_is_seeded():
    state = run_bound(random_sequence(np.random.default_rng(1), 5, 40), 5)
    np.testing.assert_array_equal(sample(state, 100, seed=9), sample(state, 100, seed=9))


def test_pearson_statistic_mostly_below_upper_quantile():
    n, n_shots = 4, 2 ** 13
    state = run_bound([(Gate("RY", (q,), 0), 1.0 + 0.4 * q) for q in range(n)], n)
    probs = state.probabilities()
    assert np.count_nonzero(probs > 1e-12) >= 8
    limit = chi2.ppf(0.999, df=(1 << n) - 1)
    passed = 0
    for trial in range(100):
        counts = np.bincount(sample_indices(state, n_shots, seed=trial), minlength=1 << n)
        expected = probs * n_shots
        passed += float(((counts - expected) ** 2 / expected).sum()) < limit
    assert passed >= 95


def test_circuit_text_round_trip():
    seq = random_sequence(np.random.default_rng(2), 6, 30)
    gates = [g for g, _ in seq]
    assert circuit_from_text(circuit_to_text(gates)) == gates


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 7), n_gates=st.integers(0, 60))
def test_property_matches_dense_oracle_and_stays_normalized(seed, n, n_gates):
    seq = random_sequence(np.random.default_rng(seed), n, n_gates)
    got = run_bound(seq, n)
    assert np.max(np.abs(got.amplitudes - dense_state(n, seq))) <= 1e-10
    assert abs(got.norm() - 1) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_sparse_kronecker_oracle_agrees_with_matrix_exponential(seed):
    # the acceptance suite relies on the sparse oracle for n up to 12
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 8))
    seq = random_sequence(rng, n, 60)
    assert np.max(np.abs(kron_state(n, seq) - dense_state(n, seq))) <= 1e-12
