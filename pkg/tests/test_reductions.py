import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcsp.assignments import (
    ObservableAssignment,
    PvmAssignment,
    eval_labelcover_value,
    eval_lin_observable_value,
    labeling_to_assignment,
    planted_assignment,
    random_labelcover_assignment,
    validate_assignment,
)
from qcsp.config import BudgetExceededError
from qcsp.fourier import fourier_transform, mask_to_signs, signs_to_mask
from qcsp.instances import LabelCoverInstance, generate_planted_ulc, generate_random_ulc, validate_instance
from qcsp.operators import PAULI_X, PAULI_Z, random_observable, random_pvm
from qcsp.reductions import (
    closed_form_2lin_value,
    closed_form_maxcut_value,
    closed_form_psi_value,
    completeness_value_2lin,
    compute_beta,
    fold_2lin,
    fold_assignment,
    fold_tables,
    lift_completeness_2lin,
    lift_completeness_maxcut,
    maxcut_completeness_bound,
    pvm_triangle_slack,
    reduce_ulc_to_2lin,
    reduce_ulc_to_maxcut,
    unfold_assignment,
)


def _edge(pi, weight=1.0):
    return LabelCoverInstance(1, 1, len(pi), [0], [0], [pi], [weight])


def _random_alpha(n, d, rng, folded_m=None):
    A = np.array([random_observable(d, rng) for _ in range(n)])
    if folded_m is not None:
        M = 1 << folded_m
        A = A.reshape(-1, M, d, d)
        A[:, 1::2] = -A[:, (np.arange(1, M, 2) ^ (M - 1))]
        A = A.reshape(-1, d, d)
    return ObservableAssignment(A, "noncommutative")


def _explicit_2lin_value(phi, eps, A):
    """The noisy long-code test evaluated with sign vectors and explicit loops."""
    m = phi.alphabet
    M = 1 << m
    L = phi.left_count
    d = A.shape[-1]
    block = A.reshape(-1, M, d, d)
    points = [np.array(p) for p in itertools.product((1, -1), repeat=m)]

    def prob(mu):
        return np.prod([eps if s < 0 else 1 - eps for s in mu])

    def tr(X, Y):
        return np.trace(X @ Y).real / d

    inv = phi.inverse_projections()
    total = 0.0
    for x in points:
        for mu in points:
            p = prob(mu) / M
            for w, pw in enumerate(np.concatenate([phi.left_marginals(), phi.right_marginals()])):
                total += pw * p / 4 * (0.5 + 0.5 * tr(block[w][signs_to_mask(x)], block[w][signs_to_mask(x * mu)]))
            for e in range(phi.edge_count):
                u, v = phi.edge_u[e], phi.edge_v[e]
                y = np.array([x[inv[e][i]] for i in range(m)]) * mu
                total += phi.weights[e] * p / 2 * (0.5 + 0.5 * tr(block[u][signs_to_mask(x)], block[L + v][signs_to_mask(y)]))
    return total


def test_two_lin_weight_example():
    red = reduce_ulc_to_2lin(_edge([0]), 0.1)
    first = np.flatnonzero((red.edge_type == 1) & (red.psi.scopes[:, 0] == 0) & (red.psi.scopes[:, 1] == 0))
    assert len(first) == 1
    assert red.psi.weights[first[0]] == pytest.approx(0.1125)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.floats(0.01, 0.49), st.integers(0, 10**6))
def test_two_lin_structure(L, R, m, eps, seed):
    phi = generate_random_ulc(L, R, m, seed=seed)
    red = reduce_ulc_to_2lin(phi, eps)
    assert red.psi.variable_count == (L + R) * 2**m
    assert np.all(red.psi.parities == 1)
    assert abs(red.psi.weights.sum() - 1) <= 1e-12
    assert validate_instance(red.psi).valid
    assert red.vertex_index("v", 0, 0) == L * 2**m


def test_two_lin_value_against_explicit_loops():
    rng = np.random.default_rng(0)
    phi = generate_random_ulc(2, 1, 2, seed=0)
    red = reduce_ulc_to_2lin(phi, 0.15)
    alpha = _random_alpha(red.psi.variable_count, 2, rng)
    expected = _explicit_2lin_value(phi, 0.15, alpha.observables)
    assert eval_lin_observable_value(red.psi, alpha) == pytest.approx(expected, abs=1e-12)
    assert closed_form_2lin_value(red, alpha) == pytest.approx(expected, abs=1e-12)


def test_two_lin_rejects_bad_inputs():
    with pytest.raises(ValueError):
        reduce_ulc_to_2lin(_edge([0, 1]), 0.5)
    with pytest.raises(ValueError):
        reduce_ulc_to_2lin(LabelCoverInstance(1, 1, 2, [0], [0], [[0, 0]], [1.0], unique=False), 0.1)
    with pytest.raises(ValueError):
        reduce_ulc_to_2lin(_edge([0, 0]), 0.1)
    with pytest.raises(BudgetExceededError):
        reduce_ulc_to_2lin(_edge(list(range(7))), 0.1)


def test_fold_single_bit_example():
    red = reduce_ulc_to_2lin(_edge([0]), 0.1)
    folded = fold_2lin(red)
    assert folded.psi.variable_count == 2  # one representative per block
    k = np.flatnonzero((red.edge_type == 1) & (red.psi.scopes[:, 0] == 0) & (red.psi.scopes[:, 1] == 1))[0]
    assert folded.psi.scopes[k].tolist() == [0, 0]
    assert folded.psi.parities[k] == -1


def test_fold_parities_and_weights():
    phi = generate_random_ulc(2, 2, 3, seed=1)
    red = reduce_ulc_to_2lin(phi, 0.2)
    folded = fold_2lin(red)
    assert folded.psi.weights.sum() == pytest.approx(1.0, abs=1e-12)
    x = red.psi.scopes % 8
    both_reps = (x[:, 0] & 1 == 0) & (x[:, 1] & 1 == 0)
    assert np.all(folded.psi.parities[both_reps] == 1)
    kappa, theta = fold_tables(3)
    assert np.all(theta & 1 == 0)
    assert np.all(kappa[theta] == 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_fold_unfold_round_trip(seed):
    rng = np.random.default_rng(seed)
    folded = fold_2lin(reduce_ulc_to_2lin(generate_random_ulc(1, 2, 2, seed=seed), 0.1))
    rep = _random_alpha(folded.psi.variable_count, 2, rng)
    full = fold_assignment(folded, rep)
    A = full.observables.reshape(-1, 4, 2, 2)
    assert np.array_equal(A[:, ::-1], -A)
    assert np.array_equal(unfold_assignment(folded, full).observables, rep.observables)


def test_folding_preserves_value():
    rng = np.random.default_rng(2)
    folded = fold_2lin(reduce_ulc_to_2lin(generate_random_ulc(2, 2, 2, seed=2), 0.1))
    rep = _random_alpha(folded.psi.variable_count, 2, rng)
    full = fold_assignment(folded, rep)
    assert eval_lin_observable_value(folded.reduction.psi, full) == pytest.approx(eval_lin_observable_value(folded.psi, rep), abs=1e-12)


def test_unfold_rejects_non_odd():
    folded = fold_2lin(reduce_ulc_to_2lin(_edge([1, 0]), 0.1))
    with pytest.raises(ValueError):
        unfold_assignment(folded, ObservableAssignment(np.array([np.eye(2)] * 8)))


def test_folded_flag_checked_by_validator():
    phi = generate_random_ulc(1, 1, 2, seed=3)
    red = reduce_ulc_to_2lin(phi, 0.1)
    odd = lift_completeness_2lin(red, labeling_to_assignment([0, 1], 2))
    assert validate_assignment(red.psi, odd).valid
    fake = ObservableAssignment(np.array([np.eye(1)] * 8), "classical", folded=True)
    assert not validate_assignment(red.psi, fake).valid


def test_perfect_lift_value():
    phi, sigma = generate_planted_ulc(2, 2, 2, seed=4)
    pi = planted_assignment(sigma, 2, np.random.default_rng(4))
    for eps, expected in ((0.1, 0.9), (1e-9, 1 - 1e-9)):
        red = reduce_ulc_to_2lin(phi, eps)
        assert eval_lin_observable_value(red.psi, lift_completeness_2lin(red, pi)) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 3), st.sampled_from([0.05, 0.1, 0.2]), st.integers(0, 10**6))
def test_two_lin_completeness_identity(m, eps, seed):
    rng = np.random.default_rng(seed)
    phi = generate_random_ulc(2, 2, m, seed=rng)
    pi = random_labelcover_assignment(phi, rng, 2, 2)
    red = reduce_ulc_to_2lin(phi, eps)
    alpha = lift_completeness_2lin(red, pi)
    assert alpha.folded
    assert eval_lin_observable_value(red.psi, alpha) == pytest.approx(
        completeness_value_2lin(eps, eval_labelcover_value(phi, pi)), abs=1e-9)


def test_lift_requires_quantum_assignment():
    phi = _edge([0, 1])
    eye = np.eye(2)
    bad = PvmAssignment(np.array([[(eye + PAULI_X) / 2, (eye - PAULI_X) / 2], [(eye + PAULI_Z) / 2, (eye - PAULI_Z) / 2]]))
    with pytest.raises(ValueError):
        lift_completeness_2lin(reduce_ulc_to_2lin(phi, 0.1), bad)


def test_maxcut_weight_example():
    phi = LabelCoverInstance(1, 2, 1, [0, 0], [0, 1], [[0], [0]], [0.5, 0.5])
    red = reduce_ulc_to_maxcut(phi, -0.5)
    assert red.psi.variable_count == 4
    a, b = red.vertex_index(0, 0), red.vertex_index(1, 1)
    hit = np.flatnonzero((red.psi.scopes[:, 0] == a) & (red.psi.scopes[:, 1] == b))
    assert len(hit) == 1
    assert red.psi.weights[hit[0]] == pytest.approx(0.25 * 0.5 * 0.75)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.floats(-0.95, -0.05), st.integers(0, 10**6))
def test_maxcut_structure(L, R, m, rho, seed):
    phi = generate_random_ulc(L, R, m, seed=seed)
    red = reduce_ulc_to_maxcut(phi, rho)
    assert red.psi.variable_count == R * 2**m
    assert red.psi.is_maxcut
    assert abs(red.psi.weights.sum() - 1) <= 1e-12


def test_maxcut_rejects_isolated_left_vertex_and_bad_rho():
    phi = LabelCoverInstance(2, 1, 2, [0], [0], [[0, 1]], [1.0])
    with pytest.raises(ValueError):
        reduce_ulc_to_maxcut(phi, -0.5)
    with pytest.raises(ValueError):
        reduce_ulc_to_maxcut(_edge([0, 1]), 0.2)


def test_maxcut_perfect_lift_and_small_rho():
    phi, sigma = generate_planted_ulc(2, 2, 2, seed=5)
    pi = planted_assignment(sigma, 2, np.random.default_rng(5))
    red = reduce_ulc_to_maxcut(phi, -0.5)
    assert eval_lin_observable_value(red.psi, lift_completeness_maxcut(red, pi)) == pytest.approx(0.75, abs=1e-12)
    red = reduce_ulc_to_maxcut(phi, -1e-9)
    assert eval_lin_observable_value(red.psi, lift_completeness_maxcut(red, pi)) == pytest.approx(0.5, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_pvm_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    assert pvm_triangle_slack(*(random_pvm(3, 4, rng) for _ in range(3))) >= -1e-12


def test_maxcut_bound_holds_for_planted_assignments():
    rng = np.random.default_rng(6)
    phi, sigma = generate_planted_ulc(2, 3, 2, seed=6)
    red = reduce_ulc_to_maxcut(phi, -0.6)
    pi = planted_assignment(sigma, 3, rng)
    zeta = 1 - eval_labelcover_value(phi, pi)
    value = eval_lin_observable_value(red.psi, lift_completeness_maxcut(red, pi))
    assert value >= maxcut_completeness_bound(-0.6, zeta) - 1e-12


def test_constant_identity_values():
    phi = generate_random_ulc(2, 2, 2, seed=7)
    two = reduce_ulc_to_2lin(phi, 0.1)
    cut = reduce_ulc_to_maxcut(phi, -0.5)
    ones = lambda n: ObservableAssignment(np.array([np.eye(2)] * n))
    assert closed_form_psi_value(two, ones(two.psi.variable_count)) == pytest.approx(1.0)
    assert closed_form_psi_value(cut, ones(cut.psi.variable_count)) == pytest.approx(0.0)
    with pytest.raises(TypeError):
        closed_form_psi_value(object(), ones(1))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_closed_forms_match_summation(seed):
    rng = np.random.default_rng(seed)
    phi = generate_random_ulc(2, 2, 2, seed=rng)
    two = reduce_ulc_to_2lin(phi, 0.1)
    alpha = _random_alpha(two.psi.variable_count, 2, rng, folded_m=2)
    assert closed_form_2lin_value(two, alpha) == pytest.approx(eval_lin_observable_value(two.psi, alpha), abs=1e-10)
    cut = reduce_ulc_to_maxcut(phi, -0.4)
    alpha = _random_alpha(cut.psi.variable_count, 2, rng, folded_m=2)
    assert closed_form_maxcut_value(cut, alpha) == pytest.approx(eval_lin_observable_value(cut.psi, alpha), abs=1e-10)


def test_beta_examples():
    rng = np.random.default_rng(8)
    single = LabelCoverInstance(1, 1, 2, [0], [0], [[1, 0]], [1.0])
    red = reduce_ulc_to_maxcut(single, -0.5)
    alpha = _random_alpha(4, 2, rng)
    beta = compute_beta(red, alpha, 0).values
    # pi_{v,u} = [1, 0] swaps the two coordinates
    for x in range(4):
        s = mask_to_signs(x, 2)
        assert np.allclose(beta[x], alpha.observables[signs_to_mask([s[1], s[0]])])

    twin = LabelCoverInstance(1, 2, 2, [0, 0], [0, 1], [[0, 1], [0, 1]], [0.5, 0.5])
    red = reduce_ulc_to_maxcut(twin, -0.5)
    A = np.array([random_observable(2, rng) for _ in range(4)])
    beta = compute_beta(red, ObservableAssignment(np.concatenate([A, A])), 0).values
    assert np.allclose(beta, A)


def test_beta_is_subnormalized():
    rng = np.random.default_rng(9)
    phi = generate_random_ulc(2, 3, 2, seed=9)
    red = reduce_ulc_to_maxcut(phi, -0.5)
    alpha = _random_alpha(red.psi.variable_count, 2, rng)
    for u in range(2):
        sq = fourier_transform(compute_beta(red, alpha, u)).squared().sum(axis=0)
        assert np.linalg.eigvalsh(sq).max() <= 1 + 1e-12
