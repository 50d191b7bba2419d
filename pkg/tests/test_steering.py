import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsteer.incompat import is_genuinely_incompatible
from qsteer.linalg import haar_ket, max_entangled, matrix_power
from qsteer.observables import QuditObservable, generalized_pauli, mub_observable, omega
from qsteer.steering import (
    CorrelatorTable,
    LhsModel,
    ProbTable,
    Scenario,
    bound_objective,
    classical_bound_estimate,
    correlators_from_probs,
    ideal_realization,
    lhs_value,
    prob_table,
    probs_from_correlators,
    quantum_max,
    random_scenario,
    steering_value,
    steering_value_from_probs,
)


def paulis(d):
    return list(generalized_pauli(d))


def mub_family(d):
    return [mub_observable(d, k) for k in range(d)] + [paulis(d)[1]]


def expectation_oracle(s):
    """B_d through explicit Kronecker products."""
    total = 0j
    for a, b in zip(s.alice, s.bob):
        for k in range(1, s.d):
            op = np.kron(matrix_power(a.matrix, k), matrix_power(b.matrix, k))
            total += np.vdot(s.state, op @ s.state)
    return total


def born_oracle(s):
    def projectors(o):
        vals, vecs = np.linalg.eig(o.matrix)
        vecs, _ = np.linalg.qr(vecs)  # eigenvectors of a normal matrix, re-orthonormalized
        labels = np.round(np.angle(vals) / (2 * np.pi / o.d)).astype(int) % o.d
        return [vecs[:, labels == a] @ vecs[:, labels == a].conj().T for a in range(o.d)]

    n, d = s.n_settings, s.d
    p = np.zeros((n, n, d, d))
    for x in range(n):
        for y in range(n):
            pa, pb = projectors(s.alice[x]), projectors(s.bob[y])
            for a in range(d):
                for b in range(d):
                    p[x, y, a, b] = np.vdot(s.state, np.kron(pa[a], pb[b]) @ s.state).real
    return p


# --- scenarios and values --------------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_ideal_value_is_quantum_max(d):
    s = ideal_realization(paulis(d))
    assert abs(steering_value(s) - quantum_max(2, d)) < 1e-9
    assert abs(expectation_oracle(s) - 2 * (d - 1)) < 1e-9


def test_ideal_examples():
    assert abs(steering_value(ideal_realization(paulis(2))) - 2) < 1e-12
    s = ideal_realization([mub_observable(3, 0), mub_observable(3, 1), paulis(3)[1]])
    assert abs(steering_value(s) - 6) < 1e-9
    z2 = paulis(2)[1]
    assert abs(steering_value(ideal_realization([z2, z2])) - 2) < 1e-12


def test_ideal_embedding_keeps_value():
    s = ideal_realization(paulis(3), bob_dim=7)
    assert s.bob_dim == 7
    assert abs(steering_value(s) - 4) < 1e-9


def test_value_examples():
    x3, z3 = paulis(3)
    assert abs(steering_value(ideal_realization([x3, z3])) - 4) < 1e-9
    x, z = paulis(2)
    prod = Scenario((x, z), (x, z), np.array([1, 0, 0, 0]))
    assert abs(steering_value(prod) - 1) < 1e-12


def test_quantum_max():
    assert quantum_max(2, 2) == 2 and quantum_max(2, 3) == 4 and quantum_max(1, 2) == 1
    with pytest.raises(ValueError):
        quantum_max(0, 2)


def test_k_subset():
    s = ideal_realization(paulis(5))
    assert abs(steering_value(s, ks=(1, 4)) - 4) < 1e-9
    with pytest.raises(ValueError):
        steering_value(s, ks=(0,))


def test_scenario_validation():
    x, z = paulis(2)
    with pytest.raises(ValueError):
        Scenario((x,), (x, z), max_entangled(2))
    with pytest.raises(ValueError, match="normalized"):
        Scenario((x,), (x,), np.ones(4))
    with pytest.raises(ValueError, match="cap"):
        Scenario((x,), (QuditObservable(2, np.eye(80)),), max_entangled(2, 80))


def test_random_scenarios_bounded_and_match_oracle():
    rng = np.random.default_rng(7)
    for j in range(500):
        d = 2 + j % 3
        n = 1 + j % 3
        s = random_scenario(d, n, d + j % 2, rng)
        v = steering_value(s)
        assert abs(v) <= quantum_max(n, d) + 1e-9
        if j < 100:
            assert abs(v - expectation_oracle(s).real) < 1e-9


# --- probabilities and correlators -------------------------------------------------------------


def test_prob_table_ideal_qubit():
    p = prob_table(ideal_realization(paulis(2))).p
    for x in range(2):
        expected = np.array([[0.5, 0], [0, 0.5]])
        assert np.allclose(p[x, x], expected, atol=1e-12)


def test_prob_table_product_state():
    z = paulis(2)[1]
    p = prob_table(Scenario((z,), (z,), np.array([1, 0, 0, 0]))).p
    assert abs(p[0, 0, 0, 0] - 1) < 1e-12


def test_prob_table_matches_born_oracle_and_marginals(rng):
    for _ in range(20):
        s = random_scenario(3, 2, 4, rng)
        p = prob_table(s).p
        assert np.allclose(p, born_oracle(s), atol=1e-10)
        rho_a = s.state_matrix() @ s.state_matrix().conj().T
        for x, a_obs in enumerate(s.alice):
            marg = [np.trace(pr @ rho_a).real for pr in a_obs.spectral_projectors()]
            for y in range(s.n_settings):
                assert np.allclose(p[x, y].sum(axis=1), marg, atol=1e-10)


def test_correlator_examples():
    d = 3
    c = correlators_from_probs(ProbTable(np.full((1, 1, d, d), 1 / d**2))).c[0, 0]
    expected = np.zeros((d, d))
    expected[0, 0] = 1
    assert np.allclose(c, expected, atol=1e-12)
    anti = np.zeros((1, 1, 2, 2))
    anti[0, 0, 0, 0] = anti[0, 0, 1, 1] = 0.5
    assert abs(correlators_from_probs(ProbTable(anti)).c[0, 0, 1, 1] - 1) < 1e-12


def test_correlators_equal_operator_expectations(rng):
    s = random_scenario(3, 2, 3, rng)
    c = correlators_from_probs(prob_table(s)).c
    for x in range(2):
        for y in range(2):
            for k in range(3):
                for l in range(3):
                    direct = s.expectation(s.alice[x].power(k), s.bob[y].power(l))
                    assert abs(c[x, y, k, l] - direct) < 1e-10
    assert np.allclose(c[:, :, 0, 0], 1, atol=1e-10)
    assert np.allclose(c[:, :, 1, 1], np.conj(c[:, :, 2, 2]), atol=1e-10)


def test_inverse_transform_examples():
    c = np.zeros((1, 1, 3, 3), dtype=complex)
    c[0, 0, 0, 0] = 1
    assert np.allclose(probs_from_correlators(CorrelatorTable(c)).p, 1 / 9)
    s = ideal_realization(mub_family(3))
    p = prob_table(s)
    back = probs_from_correlators(correlators_from_probs(p))
    assert np.max(np.abs(back.p - p.p)) < 1e-12
    bad = np.zeros((1, 1, 2, 2), dtype=complex)
    bad[0, 0, 0, 0], bad[0, 0, 1, 1] = 1, 2
    with pytest.raises(ValueError):
        probs_from_correlators(CorrelatorTable(bad))


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4, 5]), st.integers(1, 3))
@settings(max_examples=60)
def test_fourier_round_trip(seed, d, n):
    rng = np.random.default_rng(seed)
    p = rng.random((n, n, d, d))
    p /= p.sum(axis=(2, 3), keepdims=True)
    back = probs_from_correlators(correlators_from_probs(ProbTable(p)))
    assert np.max(np.abs(back.p - p)) < 1e-12


def test_probability_form_examples():
    assert abs(steering_value_from_probs(prob_table(ideal_realization(paulis(2)))) - 2) < 1e-12
    assert abs(steering_value_from_probs(ProbTable(np.full((1, 1, 3, 3), 1 / 9)))) < 1e-12


@pytest.mark.parametrize("d", [2, 3])
def test_probability_form_agrees_with_correlator_form(d):
    rng = np.random.default_rng(d)
    for _ in range(100):
        s = random_scenario(d, 2, d + 1, rng)
        assert abs(steering_value_from_probs(prob_table(s)) - steering_value(s)) < 1e-9


def test_printed_probability_coefficients_disagree():
    # weight (d-1) on outcomes with a + b = d (mod d), i.e. never, cannot reproduce the value
    s = ideal_realization(paulis(3))
    p = prob_table(s).p
    d = 3
    printed = sum((d - 1) * p[x, x, a, b] for x in range(2) for a in range(d) for b in range(d) if (a + b) % d == d)
    assert printed == 0 and abs(steering_value(s) - 4) < 1e-9


# --- classical bound ----------------------------------------------------------------------------


def bloch_grid_oracle(n=2001):
    # |<X>| + |<Z>| = |sin t cos f| + |cos t| on a grid that contains t = pi/4, f = 0
    t = np.linspace(0, np.pi, 4 * (n // 4) + 1)
    f = np.linspace(0, 2 * np.pi, n)
    tt, ff = np.meshgrid(t, f)
    return float(np.max(np.abs(np.sin(tt) * np.cos(ff)) + np.abs(np.cos(tt))))


def test_bound_single_observable():
    assert abs(classical_bound_estimate([paulis(2)[1]], restarts=20).best - 1) < 1e-9
    assert abs(classical_bound_estimate([paulis(3)[1]], restarts=20).best - 2) < 1e-9


def test_bound_qubit_paulis_matches_grid():
    est = classical_bound_estimate(paulis(2), restarts=200, seed=0)
    oracle = bloch_grid_oracle()
    assert abs(oracle - np.sqrt(2)) < 1e-12
    assert abs(est.best - oracle) < 1e-5
    assert abs(est.gap - (2 - np.sqrt(2))) < 1e-5
    assert est.converged.all()


def test_bound_qutrit_paulis_nontrivial():
    est = classical_bound_estimate(paulis(3), restarts=200, seed=0)
    rng = np.random.default_rng(1)
    kets = rng.standard_normal((200_000, 3)) + 1j * rng.standard_normal((200_000, 3))
    kets /= np.linalg.norm(kets, axis=1, keepdims=True)
    sampled = 0.0
    for a in paulis(3):
        for k in (1, 2):
            sampled = sampled + np.abs(np.einsum("rd,de,re->r", kets.conj(), a.power(k), kets))
    assert np.max(sampled) <= est.best + 1e-9
    assert est.best < 4 - 0.05


def test_bound_deterministic_and_order_free():
    a = classical_bound_estimate(paulis(3), restarts=12, seed=5)
    b = classical_bound_estimate(paulis(3), restarts=12, seed=5)
    assert np.array_equal(a.values, b.values) and a.best == b.best
    c = classical_bound_estimate(paulis(3), restarts=6, seed=5)
    assert np.allclose(c.values, a.values[:6], atol=1e-12)


def test_bound_rejects_zero_restarts():
    with pytest.raises(ValueError):
        classical_bound_estimate(paulis(2), restarts=0)


def test_bound_objective_density_matrix():
    psi = max_entangled(2)[:2] * np.sqrt(2)
    rho = np.outer(psi, psi.conj())
    assert abs(bound_objective(paulis(2), psi) - bound_objective(paulis(2), rho)) < 1e-12


@pytest.mark.parametrize("alice", [paulis(2), paulis(3), mub_family(3)], ids=["xz2", "xz3", "mub3"])
def test_nontriviality_for_genuinely_incompatible_sets(alice):
    assert is_genuinely_incompatible(alice)
    est = classical_bound_estimate(alice, restarts=200, seed=0)
    assert est.best < quantum_max(len(alice), alice[0].d) - 0.05


# --- LHS models -----------------------------------------------------------------------------------


def test_lhs_single_state():
    m = LhsModel([1.0], [np.diag([1.0, 0.0])], np.array([[[1.0, 0.0]]]))
    assert abs(lhs_value(m, [paulis(2)[1]]) - 1) < 1e-12


def test_lhs_uniform_responses():
    m = LhsModel([1.0], [np.diag([0.3, 0.7])], np.full((1, 1, 3), 1 / 3))
    alice = [paulis(3)[0]]
    m = LhsModel([1.0], [np.diag([0.2, 0.3, 0.5])], np.full((1, 1, 3), 1 / 3))
    assert abs(lhs_value(m, alice)) < 1e-12


def _random_lhs(rng, d, n, n_hidden):
    w = rng.random(n_hidden)
    w /= w.sum()
    states = []
    for _ in range(n_hidden):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        r = g @ g.conj().T
        states.append(r / np.trace(r).real)
    resp = rng.random((n_hidden, n, d)) ** 4
    resp /= resp.sum(axis=2, keepdims=True)
    return LhsModel(w, np.array(states), resp)


def test_lhs_below_classical_bound():
    rng = np.random.default_rng(3)
    alice = paulis(2)
    for _ in range(200):
        m = _random_lhs(rng, 2, 2, int(rng.integers(1, 5)))
        v = lhs_value(m, alice)
        assert v <= np.sqrt(2) + 1e-6
        best_hidden = max(bound_objective(alice, r) for r in m.states)
        assert v <= best_hidden + 1e-7


def test_lhs_validation():
    with pytest.raises(ValueError):
        LhsModel([0.5], [np.eye(2) / 2], np.full((1, 1, 2), 0.5))
    with pytest.raises(ValueError):
        LhsModel([1.0], [np.diag([1.5, -0.5])], np.full((1, 1, 2), 0.5))
    m = LhsModel([1.0], [np.eye(2) / 2], np.full((1, 1, 2), 0.5))
    with pytest.raises(ValueError, match="dimensions"):
        lhs_value(m, paulis(2))
