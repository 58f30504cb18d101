import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bondvqa.portfolio import (
    GeneratorConfig,
    PenalizedProblem,
    bits_to_index,
    build_instance,
    build_problem,
    choose_penalty_scales,
    index_to_bits,
    instance_from_dict,
    instance_to_dict,
    is_feasible,
    load_instance,
    objective_cost,
    penalized_cost,
    penalized_costs,
    problem_scale,
    save_instance,
    to_matrix_form,
)
from bondvqa.vqa import CostCache

from oracles import all_bitstrings, constrained_optimum

TWO_BONDS = GeneratorConfig(n_bonds=2, classes_per_dimension=(1,), n_metrics=1, seed=0)


@pytest.fixture(scope="module")
def two_bond():
    return build_instance(TWO_BONDS)


@pytest.fixture(scope="module")
def n12():
    inst = build_instance(GeneratorConfig(n_bonds=12, seed=5))
    return inst, build_problem(inst)


def _hand_terms(inst):
    tau = inst.targets[0][0][0]
    coef = np.array([b.metric_weights[0][0] * b.lot_count * b.lot_size for b in inst.bonds])
    return tau, coef


def test_two_bond_matrix_matches_hand_expansion(two_bond):
    tau, (c1, c2) = _hand_terms(two_bond)
    p = to_matrix_form(two_bond)
    # (tau - c1 x1 - c2 x2)^2 with x^2 = x folded onto the diagonal
    expected = np.array([[c1 * c1 - 2 * tau * c1, c1 * c2],
                         [c1 * c2, c2 * c2 - 2 * tau * c2]])
    np.testing.assert_allclose(p.Q, expected, rtol=1e-13)
    assert p.constant == pytest.approx(tau * tau, rel=1e-15)


def test_two_bond_objective_at_single_selection(two_bond):
    tau, (c1, _) = _hand_terms(two_bond)
    assert objective_cost(two_bond, [1, 0]) == pytest.approx((tau - c1) ** 2, rel=1e-13)


def test_empty_portfolio_costs_sum_of_squared_targets():
    inst = build_instance(GeneratorConfig(n_bonds=10, seed=3))
    squares = sum(t * t for dim in inst.targets for row in dim for t in row)
    assert objective_cost(inst, np.zeros(10)) == pytest.approx(squares, rel=1e-13)


def test_matrix_form_agrees_with_objective_on_random_portfolios(n12):
    inst, p = n12
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, size=(1000, inst.n))
    direct = np.array([objective_cost(inst, x) for x in X])
    matrix = p.constant + np.einsum("ij,jk,ik->i", X, p.Q, X)
    assert np.max(np.abs(direct - matrix)) <= 1e-9 * problem_scale(p)


def test_generator_shapes_and_determinism():
    cfg = GeneratorConfig(n_bonds=16, classes_per_dimension=(3, 2), n_metrics=2, seed=7)
    inst = build_instance(cfg)
    assert inst.n == 16 and inst.n_classes == 5 and inst.n_targets == 10
    assert build_instance(cfg) == inst
    assert build_instance(GeneratorConfig(n_bonds=16, seed=8)) != inst


def test_generated_instance_has_feasible_portfolio():
    inst = build_instance(GeneratorConfig(n_bonds=16, seed=7))
    p = build_problem(inst)
    slack = all_bitstrings(16) @ p.A.T - p.b
    assert np.any(np.all(slack <= 0, axis=1))


@pytest.mark.parametrize("kwargs", [
    {"n_bonds": 1},
    {"classes_per_dimension": (3, 0)},
    {"classes_per_dimension": ()},
    {"n_bonds": 3, "classes_per_dimension": (4,)},
])
def test_generator_rejects_bad_sizes(kwargs):
    with pytest.raises(ValueError):
        build_instance(GeneratorConfig(**kwargs))


def test_no_guardrails_leaves_only_budget_row():
    inst = build_instance(GeneratorConfig(n_bonds=10, guardrail_fraction=0.0, seed=1))
    assert to_matrix_form(inst).A.shape == (1, 10)


def test_penalty_scale_direct_formula():
    p = PenalizedProblem(Q=[[1.0, 1.0], [1.0, 1.0]], constant=0.0, A=[[1.0, 0.0]], b=[1.0])
    np.testing.assert_array_equal(choose_penalty_scales(p, 10).scales, [40.0])


@pytest.mark.parametrize("kappa", [0, -1.0])
def test_nonpositive_kappa_rejected(kappa):
    p = PenalizedProblem(Q=np.eye(2), constant=0.0, A=[[1.0, 0.0]], b=[1.0])
    with pytest.raises(ValueError):
        choose_penalty_scales(p, kappa)


def test_zero_row_with_negative_bound_is_unsatisfiable():
    p = PenalizedProblem(Q=np.eye(2), constant=0.0, A=[[0.0, 0.0]], b=[-1.0])
    with pytest.raises(ValueError, match="unsatisfiable"):
        choose_penalty_scales(p)


def test_unscaled_problem_cannot_be_evaluated():
    p = PenalizedProblem(Q=np.eye(2), constant=0.0, A=[[1.0, 1.0]], b=[1.0])
    with pytest.raises(ValueError, match="scales"):
        penalized_cost(p, [0, 1])


def test_budget_violation_adds_scaled_excess():
    inst = build_instance(GeneratorConfig(n_bonds=10, guardrail_fraction=0.0, seed=2))
    p = build_problem(inst)
    x = np.ones(10)
    excess = float(p.A[0] @ x - p.b[0])
    assert excess > 0
    expected = objective_cost(inst, x) + p.scales[0] * excess
    assert penalized_cost(p, x) == pytest.approx(expected, rel=1e-12)


def test_penalty_is_nonnegative_and_vanishes_exactly_on_feasible(n12):
    inst, p = n12
    X = all_bitstrings(12)
    raw = np.array([objective_cost(inst, x) for x in X])
    pen = penalized_costs(p, X)
    feasible = np.all(X @ p.A.T <= p.b, axis=1)
    tol = 1e-9 * problem_scale(p)
    assert np.all(pen - raw >= -tol)
    np.testing.assert_allclose(pen[feasible], raw[feasible], atol=tol)
    # minimal violation is half a grid step, scaled by at least kappa * B
    assert np.all(pen[~feasible] - raw[~feasible] > 1.0)


@pytest.mark.parametrize("seed", range(12))
def test_penalized_argmin_is_constrained_optimum(seed):
    n = 8 + seed % 5
    inst = build_instance(GeneratorConfig(n_bonds=n, seed=100 + seed))
    p = build_problem(inst)
    table = CostCache(p).full()
    k = int(np.argmin(table))
    x_best, f_best = constrained_optimum(inst, p)
    assert is_feasible(p, index_to_bits(k, n))
    assert table[k] == pytest.approx(f_best, rel=1e-12)


def test_instance_round_trip(tmp_path):
    inst = build_instance(GeneratorConfig(n_bonds=16, seed=4))
    assert instance_from_dict(instance_to_dict(inst)) == inst
    save_instance(inst, tmp_path / "a.json")
    save_instance(load_instance(tmp_path / "a.json"), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_problem_dict_round_trip(n12):
    _, p = n12
    q = PenalizedProblem.from_dict(p.to_dict())
    for name in ("Q", "A", "b", "scales"):
        np.testing.assert_array_equal(getattr(q, name), getattr(p, name))
    assert q.constant == p.constant


def test_problem_arrays_are_read_only(n12):
    _, p = n12
    with pytest.raises(ValueError):
        p.Q[0, 0] = 1.0


def test_asymmetric_q_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        PenalizedProblem(Q=[[0.0, 1.0], [0.0, 0.0]], constant=0.0, A=np.zeros((0, 2)), b=[])


def test_length_mismatch_rejected(n12):
    inst, p = n12
    with pytest.raises(ValueError):
        objective_cost(inst, np.zeros(11))
    with pytest.raises(ValueError):
        penalized_cost(p, np.zeros(13))


@given(st.integers(min_value=0, max_value=2 ** 20 - 1))
def test_bit_index_round_trip(index):
    bits = index_to_bits(index, 20)
    assert bits_to_index(bits) == index
    assert bits[0] == index & 1


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 9),
       fraction=st.floats(0, 1), noise=st.floats(0, 0.5))
def test_generated_instances_are_feasible_and_penalty_exact(seed, n, fraction, noise):
    inst = build_instance(GeneratorConfig(n_bonds=n, classes_per_dimension=(2, 1),
                                          seed=seed, guardrail_fraction=fraction, noise=noise))
    p = build_problem(inst)
    table = CostCache(p).full()
    _, f_best = constrained_optimum(inst, p)
    assert f_best is not None
    assert is_feasible(p, index_to_bits(int(np.argmin(table)), n))
    assert table.min() == pytest.approx(f_best, rel=1e-12, abs=1e-9)
