import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcilab.errors import CapacityError, ContractionError
from tcilab.spaces import DiscreteMeasure, FiniteMetricSpace, product_space
from tcilab.tensorize import (SequentialModel, backward_coefficients,
                              default_weight_delta, dependent_hoeffding_bound,
                              entropy_chain_rule, forward_coefficient,
                              invariant_fixed_point, joint_law, joint_weights,
                              marton_coupling, martingale_constant,
                              tensorized_constant, weight_vector)
from tcilab.transport import kl_divergence, wasserstein_exact

TWO = FiniteMetricSpace.trivial()
KERNEL = np.array([[0.9, 0.1], [0.2, 0.8]])


def two_state(start, kernel, n):
    return SequentialModel.markov(TWO, start, kernel, n)


def random_history_model(rng, m, n):
    steps = [rng.dirichlet(np.ones(m), size=m**i) for i in range(n)]
    return SequentialModel(FiniteMetricSpace.trivial(range(m)), steps)


# ---------------------------------------------------------------------------
# joint law and chain rule


def test_joint_law_single_step_is_the_start_row():
    model = two_state([0.3, 0.7], KERNEL, 1)
    assert np.allclose(joint_weights(model), [0.3, 0.7], atol=1e-15)


def test_joint_law_iid_uniform():
    model = two_state([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], 2)
    assert np.allclose(joint_weights(model), 0.25, atol=1e-15)


def test_joint_law_hand_multiplication():
    model = two_state([0.5, 0.5], KERNEL, 2)
    assert np.allclose(joint_weights(model), [0.45, 0.05, 0.10, 0.40], atol=1e-15)
    measure = joint_law(model, p=1.0)
    assert measure.space.points[1] == (0, 1)


def test_chain_rule_identical_models_vanish():
    model = two_state([0.5, 0.5], KERNEL, 3)
    per_step, total = entropy_chain_rule(model, model)
    assert total == 0.0 and all(s == 0.0 for s in per_step)


def test_chain_rule_product_measures():
    q = two_state([0.75, 0.25], [[0.75, 0.25], [0.75, 0.25]], 2)
    p = two_state([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], 2)
    per_step, total = entropy_chain_rule(q, p)
    kl = kl_divergence(np.array([0.75, 0.25]), np.array([0.5, 0.5]))
    assert per_step[0] == pytest.approx(kl, abs=1e-15)
    assert per_step[1] == pytest.approx(kl, abs=1e-15)
    assert total == pytest.approx(2 * kl, abs=1e-14)


def test_chain_rule_matches_joint_kl_on_random_models():
    rng = np.random.default_rng(42)
    for _ in range(40):
        m = int(rng.integers(2, 5))
        n = int(rng.integers(1, 5))
        q = random_history_model(rng, m, n)
        p = random_history_model(rng, m, n)
        _, total = entropy_chain_rule(q, p)
        direct = kl_divergence(joint_weights(q), joint_weights(p))
        assert abs(total - direct) <= 1e-10


def test_chain_rule_absolute_continuity_failure():
    q = two_state([0.5, 0.5], KERNEL, 2)
    p = two_state([1.0, 0.0], KERNEL, 2)
    _, total = entropy_chain_rule(q, p)
    assert total == math.inf


# ---------------------------------------------------------------------------
# contraction coefficients


def test_backward_coefficients_iid():
    model = two_state([0.5, 0.5], [[0.3, 0.7], [0.3, 0.7]], 4)
    prof = backward_coefficients(model, 1.0)
    assert np.all(prof.a == 0.0) and prof.r == 0.0


def test_backward_coefficients_markov_tv():
    prof = backward_coefficients(two_state([0.5, 0.5], KERNEL, 3), 1.0)
    assert prof.a[0] == pytest.approx(0.7, abs=1e-12)
    assert prof.a[1] == 0.0
    assert prof.r == pytest.approx(0.7, abs=1e-12)


def test_backward_coefficients_deterministic_copy():
    prof = backward_coefficients(two_state([0.5, 0.5], np.eye(2), 2), 1.0)
    assert prof.a[0] == pytest.approx(1.0, abs=1e-12)


def test_backward_coefficients_history_model_matches_markov():
    # materialize a Markov model as explicit history rows; a_j must agree
    n, m = 3, 2
    markov = two_state([0.5, 0.5], KERNEL, n)
    steps = [markov.step_rows(i).copy() for i in range(n)]
    explicit = SequentialModel(TWO, steps)
    pa = backward_coefficients(markov, 1.0)
    pb = backward_coefficients(explicit, 1.0)
    assert np.allclose(pa.a, pb.a, atol=1e-12)
    assert not pb.sampled


def test_forward_coefficient_iid_zero():
    model = two_state([0.5, 0.5], [[0.3, 0.7], [0.3, 0.7]], 3)
    assert forward_coefficient(model) == pytest.approx(0.0, abs=1e-12)


def test_forward_coefficient_two_and_three_steps():
    assert forward_coefficient(two_state([0.5, 0.5], KERNEL, 2)) == \
        pytest.approx(0.7, abs=1e-12)
    assert forward_coefficient(two_state([0.5, 0.5], KERNEL, 3)) == \
        pytest.approx(0.7 + 0.49, abs=1e-10)


def integral_lipschitz_sup(space, wa, wb):
    """Kantorovich dual by enumerating integer-valued Lipschitz functions
    (they include every vertex of the dual polytope for integral metrics)."""
    m = len(space)
    diam = int(round(space.dist.max()))
    best = 0.0
    for values in itertools.product(range(diam + 1), repeat=m):
        v = np.array(values, dtype=float)
        if np.all(np.abs(v[:, None] - v[None, :]) <= space.dist + 1e-9):
            best = max(best, abs(float(np.dot(v, wa - wb))))
    return best


def conditional_future(model, k, prefix_states):
    """Future law given x^k by brute-force conditioning of the joint law."""
    m = len(model.base)
    w = joint_weights(model).reshape((m,) * model.n)
    cond = w[tuple(prefix_states)]
    cond = cond.reshape(-1)
    return cond / cond.sum()


def test_forward_coefficient_matches_lipschitz_polytope_oracle():
    rng = np.random.default_rng(8)
    for trial in range(6):
        n = int(rng.integers(2, 5))
        if trial % 2 == 0:
            model = two_state(rng.dirichlet([1, 1]), rng.dirichlet([1, 1], size=2), n)
        else:
            model = random_history_model(rng, 2, n)
        s_val = forward_coefficient(model)
        best = 0.0
        for k in range(1, n):
            fut_space = product_space(TWO, n - k, 1.0) if n - k > 1 else TWO
            for prefix in itertools.product(range(2), repeat=k - 1):
                for x, y in ((0, 1),):
                    fa = conditional_future(model, k, prefix + (x,))
                    fb = conditional_future(model, k, prefix + (y,))
                    best = max(best, integral_lipschitz_sup(fut_space, fa, fb))
        assert s_val == pytest.approx(best, abs=1e-8)


# ---------------------------------------------------------------------------
# the stepwise coupling


def test_marton_coupling_identical_models_is_diagonal():
    model = two_state([0.5, 0.5], KERNEL, 2)
    coupling, cost = marton_coupling(model, model, 1.0)
    assert cost == pytest.approx(0.0, abs=1e-12)
    off = coupling - np.diag(np.diag(coupling))
    assert np.max(np.abs(off)) <= 1e-12


def test_marton_coupling_single_step_is_optimal():
    q = two_state([0.75, 0.25], KERNEL, 1)
    p = two_state([0.5, 0.5], KERNEL, 1)
    _, cost = marton_coupling(p, q, 1.0)
    exact, _ = wasserstein_exact(joint_law(q, 1.0), joint_law(p, 1.0), p=1.0)
    assert cost == pytest.approx(exact, abs=1e-12) == pytest.approx(0.25)


def test_marton_coupling_product_bernoullis():
    q = two_state([0.75, 0.25], [[0.75, 0.25], [0.75, 0.25]], 2)
    p = two_state([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], 2)
    coupling, cost = marton_coupling(p, q, 1.0)
    assert cost == pytest.approx(0.5, abs=1e-12)
    exact, _ = wasserstein_exact(joint_law(q, 1.0), joint_law(p, 1.0), p=1.0)
    assert exact == pytest.approx(0.5, abs=1e-12)
    assert np.max(np.abs(coupling.sum(axis=1) - joint_weights(q))) <= 1e-10
    assert np.max(np.abs(coupling.sum(axis=0) - joint_weights(p))) <= 1e-10


def random_positive_markov(rng, m, n):
    start = rng.dirichlet(np.ones(m)) * 0.9 + 0.1 / m
    kernel = rng.dirichlet(np.ones(m), size=m) * 0.9 + 0.1 / m
    return SequentialModel.markov(FiniteMetricSpace.trivial(range(m)),
                                  start / start.sum(),
                                  kernel / kernel.sum(axis=1, keepdims=True), n)


def test_tensorized_inequality_end_to_end_p1():
    rng = np.random.default_rng(99)
    for _ in range(30):
        m = int(rng.integers(2, 4))
        n = int(rng.integers(1, 4))
        p_model = random_positive_markov(rng, m, n)
        q_model = random_positive_markov(rng, m, n)
        prof = backward_coefficients(p_model, 1.0)
        assert prof.r < 1.0
        _, total = entropy_chain_rule(q_model, p_model)
        coupling, cost = marton_coupling(p_model, q_model, 1.0)
        exact, _ = wasserstein_exact(joint_law(q_model, 1.0), joint_law(p_model, 1.0),
                                     p=1.0)
        bound = tensorized_constant(0.25, prof.r, n, 1.0) * math.sqrt(total)
        assert exact <= cost + 1e-12
        assert cost <= bound + 1e-12
        assert np.max(np.abs(coupling.sum(axis=1) - joint_weights(q_model))) <= 1e-10
        assert np.max(np.abs(coupling.sum(axis=0) - joint_weights(p_model))) <= 1e-10


def test_tensorized_inequality_end_to_end_p2():
    # rows' sharp quadratic constants from a dense scan, with a safety margin
    rng = np.random.default_rng(123)
    scan = [DiscreteMeasure(TWO, [1 - t, t]) for t in np.linspace(0.002, 0.998, 499)]
    from tcilab.tci import check_tp
    for _ in range(5):
        p_model = random_positive_markov(rng, 2, 2)
        q_model = random_positive_markov(rng, 2, 2)
        rows = [p_model.start, p_model.kernel[0], p_model.kernel[1]]
        C = 1.05 * max(
            check_tp(DiscreteMeasure(TWO, row), scan, TWO, 2.0, 1.0).worst_ratio
            for row in rows)
        prof = backward_coefficients(p_model, 2.0)
        if prof.r >= 1.0:
            continue
        _, total = entropy_chain_rule(q_model, p_model)
        _, cost = marton_coupling(p_model, q_model, 2.0)
        bound = tensorized_constant(C, prof.r, 2, 2.0) * math.sqrt(total)
        exact, _ = wasserstein_exact(joint_law(q_model, 2.0), joint_law(p_model, 2.0),
                                     p=2.0)
        assert exact <= cost + 1e-12 <= bound + 1e-10


def test_marton_capacity_guard():
    model = two_state([0.5, 0.5], KERNEL, 11)
    with pytest.raises(CapacityError):
        marton_coupling(model, model, 1.0)


# ---------------------------------------------------------------------------
# constants, weights, the invariant measure


def test_tensorized_constant_values():
    assert tensorized_constant(0.25, 0.0, 4, 1.0) == pytest.approx(math.sqrt(2.0))
    assert tensorized_constant(0.25, 0.5, 4, 1.0) == pytest.approx(2 * math.sqrt(2.0))
    for n in (1, 5, 40):
        assert tensorized_constant(0.7, 0.0, n, 2.0) == pytest.approx(math.sqrt(1.4))
    with pytest.raises(ContractionError):
        tensorized_constant(0.25, 1.0, 4, 1.0)


def test_tensorized_constant_monotone_in_r_and_n():
    rs = np.linspace(0.0, 0.95, 12)
    vals = [tensorized_constant(0.25, r, 4, 1.0) for r in rs]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    ns = [1, 2, 5, 9]
    vals_n = [tensorized_constant(0.25, 0.3, n, 1.5) for n in ns]
    assert all(b > a for a, b in zip(vals_n, vals_n[1:]))


def test_weight_vector_trivial_and_hand_cases():
    assert np.allclose(weight_vector([0.0, 0.0], 3, 0.5), 1 / 3, atol=1e-8)
    z = weight_vector([0.5], 2, 0.5)
    assert np.allclose(z, [0.5, 0.5], atol=1e-9)
    assert z[1] * 0.5 <= 0.5 * z[0] * (1 + 1e-9)   # (zA)_1 <= delta z_1
    z3 = weight_vector([0.5, 0.0], 3, 0.5)
    assert np.allclose(z3, 1 / 3, atol=1e-9)


@settings(max_examples=100)
@given(st.integers(2, 8), st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_weight_vector_constraint_random(n, delta, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 2.0, size=n - 1)
    z = weight_vector(a, n, delta)
    assert abs(z.sum() - 1.0) < 1e-12 and np.all(z > 0)
    for k in range(n):
        za_k = float(np.dot(z[k + 1:], a[:n - 1 - k]))
        assert za_k <= delta * z[k]


def test_default_weight_delta():
    assert default_weight_delta(0.2) == 0.5
    assert default_weight_delta(0.8) == 0.8
    assert default_weight_delta(2.0) == 0.99


def test_invariant_fixed_point_symmetric_kernel():
    res = invariant_fixed_point([[0.9, 0.1], [0.1, 0.9]], TWO, 0.25)
    assert np.allclose(res.mu.weights, 0.5, atol=1e-11)
    assert res.r == pytest.approx(0.8, abs=1e-12)


def test_invariant_fixed_point_example_chain():
    res = invariant_fixed_point(KERNEL, TWO, 0.25)
    assert np.max(np.abs(res.mu.weights - [2 / 3, 1 / 3])) <= 1e-10
    assert res.r == pytest.approx(0.7, abs=1e-12)
    assert res.C_infty == pytest.approx(0.25 / 0.51, abs=1e-12)


def test_invariant_fixed_point_identity_errors():
    with pytest.raises(ContractionError):
        invariant_fixed_point(np.eye(2), TWO, 0.25)


def test_martingale_constant_values():
    assert martingale_constant(0.25, 0.0, 10) == pytest.approx(2.5)
    assert martingale_constant(0.25, 1.0, 10) == pytest.approx(10.0)
    assert martingale_constant(0.7, 0.3, 1) == pytest.approx(0.7 * 1.69)


def test_dependent_hoeffding_values():
    assert dependent_hoeffding_bound(0.25, 0.0, 100, 1.0, 0.0) == 1.0
    assert dependent_hoeffding_bound(0.25, 0.0, 100, 1.0, 10.0) == \
        pytest.approx(math.exp(-2.0))
    assert dependent_hoeffding_bound(0.25, 0.5, 100, 1.0, 10.0) == \
        pytest.approx(math.exp(-0.5))
    with pytest.raises(ContractionError):
        dependent_hoeffding_bound(0.25, 1.0, 10, 1.0, 1.0)


def test_model_json_round_trip():
    model = two_state([0.5, 0.5], KERNEL, 3)
    back = SequentialModel.from_json(model.to_json())
    assert back.is_markov and back.n == 3
    assert np.array_equal(back.kernel, model.kernel)
    rng = np.random.default_rng(1)
    hist = random_history_model(rng, 2, 3)
    back2 = SequentialModel.from_json(hist.to_json())
    for i in range(3):
        assert np.allclose(back2.step_rows(i), hist.step_rows(i), atol=1e-15)


def test_model_validation():
    with pytest.raises(ValueError):
        SequentialModel.markov(TWO, [0.5, 0.6], KERNEL, 2)
    with pytest.raises(ValueError):
        SequentialModel(TWO, [np.array([[0.5, 0.5], [0.5, 0.5]])])  # wrong shape
