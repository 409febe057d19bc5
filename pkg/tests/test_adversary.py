import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import block_diag

from sqkd.adversary import (
    AttackKind,
    AttackModel,
    OptimizerConfig,
    _Evaluator,
    attack_from_generator,
    attack_outcome,
    binary_entropy,
    constraint_satisfying_attack,
    eve_conditional_states,
    eve_information,
    evolve_round,
    holevo_bits,
    induced_error_rates,
    max_info_at_error_budget,
    named_attack,
    robustness_sweep,
    trace_distance,
    unitary_from_generator,
    verify_no_error_constraints,
)
from sqkd.protocol import AliceOp
from sqkd.quantum import Basis, born_probabilities

SMALL = OptimizerConfig(starts=6, iterations=150, seed=3)


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_attack(rng, d=4):
    return AttackModel(random_unitary(rng, 2 * d), random_unitary(rng, 2 * d), ancilla_dim=d)


def backward_only_attack(rng, d=4):
    """``U_F = I``; ``U_R`` keeps Bob's Z value and sends ``|l>|chi>`` to ``|l>|phi>`` for both l."""
    v0 = random_unitary(rng, d)
    w = block_diag(np.eye(1), random_unitary(rng, d - 1))  # fixes |chi> = |0>
    ur = block_diag(v0, v0 @ w)
    return AttackModel(np.eye(2 * d), ur, ancilla_dim=d)


def test_attack_model_validation():
    eye = np.eye(8)
    with pytest.raises(ValueError):
        AttackModel(eye * 2, eye)
    with pytest.raises(ValueError):
        AttackModel(np.eye(6), eye)
    with pytest.raises(ValueError):
        AttackModel(eye, eye, ancilla_init=np.ones(4))
    m = AttackModel(eye, eye)
    assert m.ancilla_init[0] == 1 and np.linalg.norm(m.ancilla_init) == 1


def test_identity_ctrl_returns_plus():
    s = evolve_round(named_attack(AttackKind.IDENTITY), AliceOp.CTRL)
    np.testing.assert_allclose(s.blocks(), [[math.sqrt(0.5), 0, 0, 0], [math.sqrt(0.5), 0, 0, 0]], atol=1e-12)
    assert s.alice_bit is None


def test_identity_sift0_returns_zero():
    s = evolve_round(named_attack(AttackKind.IDENTITY), AliceOp.SIFT0)
    assert born_probabilities(s, Basis.Z) == pytest.approx((1, 0), abs=1e-12)
    assert s.alice_bit == 0
    assert evolve_round(named_attack(AttackKind.IDENTITY), AliceOp.SIFT1).alice_bit == 1


def test_forward_z_copy_leaves_bob_mixed_in_x():
    s = evolve_round(named_attack(AttackKind.FORWARD_Z_INTERCEPT_RESEND), AliceOp.CTRL)
    np.testing.assert_allclose(s.bob_density(), np.eye(2) / 2, atol=1e-12)
    assert born_probabilities(s, Basis.XPLUS) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_evolution_preserves_norm():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = random_attack(rng, int(rng.integers(1, 5)))
        for op in AliceOp:
            assert abs(evolve_round(a, op).norm() - 1.0) <= 1e-10


EXACT = {
    AttackKind.IDENTITY: (0.0, 0.0, 0.0, 0.0),
    AttackKind.FORWARD_Z_INTERCEPT_RESEND: (0.5, 0.5, 0.0, 0.0),
    AttackKind.BACKWARD_Z_INTERCEPT_RESEND: (0.5, 0.0, 1.0, 1.0),
    AttackKind.BOTH_Z_INTERCEPT_RESEND: (0.5, 0.5, 1.0, 1.0),
    AttackKind.FORWARD_X_INTERCEPT_RESEND: (0.0, 0.0, 0.0, 0.0),
}


@pytest.mark.parametrize("kind", list(AttackKind))
def test_named_attack_outcomes(kind):
    o = attack_outcome(named_attack(kind))
    assert (o.e_ctrl_x, o.e_sift_z, o.eve_trace_distance, o.eve_holevo_bits) == pytest.approx(EXACT[kind], abs=1e-12)


def test_identity_rates_exact_zero():
    assert induced_error_rates(named_attack(AttackKind.IDENTITY)) == (0.0, 0.0)


def test_named_attack_needs_room_for_two_registers():
    with pytest.raises(ValueError):
        named_attack(AttackKind.BOTH_Z_INTERCEPT_RESEND, d=2)
    with pytest.raises(ValueError):
        named_attack("measure_everything")
    assert attack_outcome(named_attack(AttackKind.BACKWARD_Z_INTERCEPT_RESEND, d=2)).eve_trace_distance == pytest.approx(1.0)


def test_conditional_states_identity_equal():
    r0, r1 = eve_conditional_states(named_attack(AttackKind.IDENTITY))
    np.testing.assert_allclose(r0, r1, atol=1e-15)
    assert trace_distance(r0, r1) == 0.0


def test_backward_copy_gives_orthogonal_states():
    r0, r1 = eve_conditional_states(named_attack(AttackKind.BACKWARD_Z_INTERCEPT_RESEND))
    assert np.trace(r0 @ r1).real == pytest.approx(0.0, abs=1e-12)
    assert trace_distance(r0, r1) == pytest.approx(1.0, abs=1e-12)


def test_conditional_states_are_density_matrices():
    rng = np.random.default_rng(1)
    for _ in range(200):
        for rho in eve_conditional_states(random_attack(rng)):
            lam = np.linalg.eigvalsh(rho)
            assert lam.min() >= -1e-10 and lam.max() <= 1 + 1e-10
            assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)


def test_information_bounds_on_random_attacks():
    rng = np.random.default_rng(2)
    for _ in range(300):
        td, hol = eve_information(random_attack(rng, int(rng.integers(2, 6))))
        assert 0.0 <= td <= 1.0
        assert -1e-12 <= hol <= 1 + 1e-9
        assert hol >= 1 - binary_entropy((1 + td) / 2) - 1e-9


def test_holevo_of_orthogonal_pure_states():
    a, b = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert holevo_bits(a, b) == pytest.approx(1.0, abs=1e-12)
    assert holevo_bits(a, a) == pytest.approx(0.0, abs=1e-12)


def test_residual_identities():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = random_attack(rng)
        e_c, e_s = induced_error_rates(a)
        rep = verify_no_error_constraints(a)
        assert rep.ctrl_x_residual**2 / 4 == pytest.approx(e_c, abs=1e-12)
        assert (rep.sift0_residual**2 + rep.sift1_residual**2) / 8 == pytest.approx(e_s, abs=1e-12)
        assert len(rep.component_norms) == 16
        # each chi_jk enters once per input l, and sum_jk |chi_jk|^2 = 2
        assert sum(v**2 for v in rep.component_norms.values()) == pytest.approx(4.0, abs=1e-10)


def test_identity_satisfies_constraints():
    rep = verify_no_error_constraints(named_attack(AttackKind.IDENTITY))
    assert rep.max_residual <= 1e-12 and rep.satisfied and rep.implication_holds
    assert rep.backward_only
    assert rep.backward_cross_residual == 0.0 and rep.backward_equal_residual == 0.0


def test_backward_only_cross_terms_zero_forces_equal_terms():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = backward_only_attack(rng)
        rep = verify_no_error_constraints(a)
        assert rep.backward_only
        assert rep.backward_cross_residual <= 1e-12
        assert induced_error_rates(a)[1] <= 1e-24
        assert rep.backward_equal_residual <= 1e-12
        assert eve_information(a)[0] <= 1e-8


def test_backward_copy_violates_equal_terms():
    rep = verify_no_error_constraints(named_attack(AttackKind.BACKWARD_Z_INTERCEPT_RESEND))
    assert rep.backward_cross_residual == 0.0
    assert rep.backward_equal_residual == pytest.approx(math.sqrt(2))


def test_random_attacks_with_ctrl_errors_show_residuals():
    rng = np.random.default_rng(5)
    tol, seen = 1e-9, 0
    while seen < 100:
        a = random_attack(rng)
        if induced_error_rates(a)[0] <= 0.01:
            continue
        seen += 1
        rep = verify_no_error_constraints(a, tol)
        assert rep.max_residual > tol and not rep.satisfied


def test_implication_bound_holds_on_random_and_named_attacks():
    rng = np.random.default_rng(6)
    attacks = [random_attack(rng) for _ in range(300)] + [named_attack(k) for k in AttackKind]
    for a in attacks:
        rep = verify_no_error_constraints(a)
        assert rep.implication_holds
        assert rep.trace_distance <= rep.linear_bound + 1e-12


def test_verify_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        verify_no_error_constraints(named_attack(AttackKind.IDENTITY), tol=0.0)


@pytest.mark.parametrize("d", [2, 3, 4, 6])
def test_constraint_satisfying_family(d):
    rng = np.random.default_rng(7 + d)
    for _ in range(25):
        a = constraint_satisfying_attack(rng, d)
        rep = verify_no_error_constraints(a, tol=1e-10)
        assert rep.satisfied
        td, hol = eve_information(a)
        assert td <= 1e-8 and hol <= 1e-8


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=64, max_size=64))
def test_generator_yields_unitaries(theta):
    u = unitary_from_generator(theta)
    assert np.max(np.abs(u.conj().T @ u - np.eye(8))) <= 1e-10


def test_generator_attack_shape_checks():
    with pytest.raises(ValueError):
        attack_from_generator(np.zeros(10), d=4)
    with pytest.raises(ValueError):
        unitary_from_generator(np.zeros(7))
    a = attack_from_generator(np.zeros(128), d=4)
    assert induced_error_rates(a) == pytest.approx((0, 0), abs=1e-15)


def test_batched_evaluator_matches_exact_algebra():
    ev = _Evaluator(4)
    theta = np.random.default_rng(8).normal(size=(5, 2, 64))
    st_ = ev.forward(theta)
    for i in range(5):
        a = attack_from_generator(theta[i], 4)
        e_c, e_s = induced_error_rates(a)
        assert st_["e_c"][i] == pytest.approx(e_c, abs=1e-12)
        assert st_["e_s"][i] == pytest.approx(e_s, abs=1e-12)
        assert st_["td"][i] == pytest.approx(eve_information(a)[0], abs=1e-12)


def test_objective_gradient_matches_finite_differences():
    ev = _Evaluator(3)
    theta = np.random.default_rng(9).normal(size=(2, 2, 36))
    _, grad, _ = ev.objective_grad(theta, 0.02, 7.0)
    h = 1e-6
    fd = np.zeros_like(theta)
    for idx in np.ndindex(*theta.shape[1:]):
        for s in range(2):
            tp, tm = theta.copy(), theta.copy()
            tp[(s, *idx)] += h
            tm[(s, *idx)] -= h
            fd[(s, *idx)] = (ev.objective_grad(tp, 0.02, 7.0)[0][s] - ev.objective_grad(tm, 0.02, 7.0)[0][s]) / (2 * h)
    np.testing.assert_allclose(grad, fd, atol=1e-6)


def test_residual_jacobian_matches_finite_differences():
    ev = _Evaluator(2)
    theta = np.random.default_rng(10).normal(size=(2, 16))
    r, jac, st_ = ev.residual_jacobian(theta)
    assert r @ r == pytest.approx(st_["e_c"][0] + st_["e_s"][0], abs=1e-12)
    h = 1e-6
    flat = theta.reshape(-1)
    for i in range(flat.size):
        tp, tm = flat.copy(), flat.copy()
        tp[i] += h
        tm[i] -= h
        col = (ev.residual_jacobian(tp.reshape(2, -1))[0] - ev.residual_jacobian(tm.reshape(2, -1))[0]) / (2 * h)
        np.testing.assert_allclose(jac[:, i], col, atol=1e-6)


def test_zero_budget_search_finds_no_information():
    res = max_info_at_error_budget(0.0, 4, SMALL)
    assert res.trace_distance <= 1e-6
    assert max(res.e_ctrl_x, res.e_sift_z) <= 1e-13
    assert res.feasible_starts >= 1


def test_search_is_deterministic():
    a = max_info_at_error_budget(0.05, 3, SMALL)
    b = max_info_at_error_budget(0.05, 3, SMALL)
    assert a.trace_distance == b.trace_distance
    np.testing.assert_array_equal(a.theta, b.theta)


def test_search_respects_budget_and_reports_exact_values():
    res = max_info_at_error_budget(0.05, 4, SMALL)
    a = res.attack(4)
    e_c, e_s = induced_error_rates(a)
    assert max(e_c, e_s) <= 0.05 + 1e-13
    assert res.trace_distance == eve_information(a)[0]
    assert res.trace_distance > 0.3


def test_sweep_is_monotone():
    res = robustness_sweep([0.05, 0.0, 0.01], 3, SMALL)
    assert [r.epsilon for r in res] == [0.0, 0.01, 0.05]
    tds = [r.trace_distance for r in res]
    assert tds == sorted(tds)


def test_search_argument_checks():
    with pytest.raises(ValueError):
        max_info_at_error_budget(0.6, 4, SMALL)
    with pytest.raises(ValueError):
        max_info_at_error_budget(-0.1, 4, SMALL)
    with pytest.raises(ValueError):
        max_info_at_error_budget(0.1, 1, SMALL)
    with pytest.raises(ValueError):
        max_info_at_error_budget(0.1, 4, OptimizerConfig(starts=0))
