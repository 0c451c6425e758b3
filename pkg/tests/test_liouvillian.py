import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_t0_model
from qcascade.eigenops import decompose
from qcascade.liouvillian import (
    SpectralTensor,
    apply_generator,
    build_lamb_shift,
    build_liouvillian,
    check_detailed_balance,
    diagonal_form_liouvillian,
    diagonalize_gamma,
    energy_pair_order,
    energy_pair_violation,
    gamma_from_halfline,
    restrict_zero_temperature,
)
from qcascade.models import assemble, model_damped_cavity, model_two_atoms
from qcascade.operators import destroy, embed, hermitian_eigensystem, ket2dm, basis, sigma_minus, sigma_x


# spectral tensor


def test_halfline_scalar():
    t = gamma_from_halfline({1.0: 0.35 + 0.2j})
    g, s = t.entries[1.0]
    assert g[0, 0] == pytest.approx(0.7)
    assert s[0, 0] == pytest.approx(0.2)


def _halfline_elementwise(G):
    n = G.shape[0]
    g = np.empty((n, n), dtype=complex)
    s = np.empty((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            g[a, b] = G[a, b] + np.conj(G[b, a])
            s[a, b] = (G[a, b] - np.conj(G[b, a])) / 2j
    return g, s


def test_halfline_matrix_matches_elementwise():
    G = np.array([[1, 1j], [0, 1]]) / 2
    g, s = gamma_from_halfline({1.0: G}).entries[1.0]
    g2, s2 = _halfline_elementwise(G)
    np.testing.assert_allclose(g, g2, atol=1e-15)
    np.testing.assert_allclose(s, s2, atol=1e-15)
    assert np.array_equal(g, g.conj().T) and np.array_equal(s, s.conj().T)
    np.testing.assert_allclose(g, [[1, 0.5j], [-0.5j, 1]])


def test_halfline_zero():
    g, s = gamma_from_halfline({2.0: np.zeros((2, 2))}).entries[2.0]
    assert not np.any(g) and not np.any(s)


def test_halfline_unphysical_rejected():
    with pytest.raises(ValueError, match="positive semidefinite"):
        gamma_from_halfline({1.0: -0.5})


def test_tensor_validation():
    with pytest.raises(ValueError, match="Hermitian"):
        SpectralTensor({1.0: (np.array([[1, 1], [0, 1]]), np.zeros((2, 2)))}, channel_count=2)
    with pytest.raises(ValueError, match="negative frequencies"):
        SpectralTensor.from_rates({1.0: 1.0, -1.0: 0.1}, beta=math.inf)


def test_restrict_drops_absorption():
    t = SpectralTensor.from_rates({1.0: 1.0, -1.0: 0.4}, beta=2.0)
    r = restrict_zero_temperature(t)
    assert list(r.frequencies) == [1.0] and r.is_zero_temperature
    again = restrict_zero_temperature(r)
    assert list(again.entries) == list(r.entries)
    only = SpectralTensor.from_rates({2.0: 0.3}, beta=math.inf)
    assert restrict_zero_temperature(only).entries[2.0][0][0, 0] == 0.3


def test_restrict_keeps_negative_frequency_shifts():
    t = SpectralTensor.from_rates({-1.0: 0.4}, {-1.0: 0.2}, beta=1.0)
    r = restrict_zero_temperature(t)
    g, s = r.entries[-1.0]
    assert not np.any(g) and s[0, 0] == 0.2


def test_detailed_balance_constructed():
    beta, kappa = 1.0, 0.7
    # emission exceeds absorption by the Boltzmann factor
    t = SpectralTensor.from_rates({1.0: kappa, -1.0: kappa * math.exp(-beta)}, beta=beta)
    assert check_detailed_balance(t, beta) < 1e-15


def test_detailed_balance_missing_absorption():
    t = SpectralTensor.from_rates({1.0: 0.7}, beta=1.0)
    assert check_detailed_balance(t, 1.0) == pytest.approx(0.7)


def test_detailed_balance_thermal_oscillator():
    m = model_damped_cavity(4, 1.3, 0.5, nbar=0.5)
    assert check_detailed_balance(m.tensor, m.tensor.beta) < 1e-12
    assert check_detailed_balance(restrict_zero_temperature(m.tensor), math.inf) == 0.0


# Lamb shift and generator


def _qubit_decomposition():
    return decompose(sigma_x(), hermitian_eigensystem(np.diag([0.0, 1.0])))


def test_lamb_shift_zero():
    t = SpectralTensor.from_rates({1.0: 1.0}, beta=math.inf)
    assert not np.any(build_lamb_shift(t, _qubit_decomposition()))


def test_lamb_shift_qubit():
    t = SpectralTensor.from_rates({1.0: 1.0}, {1.0: 0.3}, beta=math.inf)
    np.testing.assert_allclose(build_lamb_shift(t, _qubit_decomposition()), 0.3 * np.diag([0, 1]), atol=1e-15)


def _two_atom_operators():
    dims = [2, 2]
    sm1, sm2 = embed(sigma_minus(), dims, 0), embed(sigma_minus(), dims, 1)
    return sm1, sm2


def test_lamb_shift_dipole_exchange():
    sys = assemble(model_two_atoms(1.0, 1.0, 0.6, 0.25))
    sm1, sm2 = _two_atom_operators()
    expect = 0.25 * (sm1.conj().T @ sm2 + sm2.conj().T @ sm1)
    np.testing.assert_allclose(sys.liouvillian.H_LS, expect, atol=1e-14)
    H = sys.model.H_S
    assert np.max(np.abs(expect @ H - H @ expect)) < 1e-10


def test_pure_commutator_is_unitary():
    H = np.diag([0.0, 1.0, 2.5])
    a = destroy(3)
    d = decompose(a + a.T, hermitian_eigensystem(H))
    L = build_liouvillian(H, SpectralTensor({}, channel_count=1, beta=math.inf), d).total
    rho = ket2dm(np.array([1, 1j, 1]) / math.sqrt(3))
    from scipy.linalg import expm

    out = apply_generator(expm(L * 0.8), rho)
    U = np.diag(np.exp(-1j * np.diag(H) * 0.8))
    np.testing.assert_allclose(out, U @ rho @ U.conj().T, atol=1e-13)


def test_damped_cavity_action_on_one_photon():
    sys = assemble(model_damped_cavity(2, 1.0, 0.4))
    out = apply_generator(sys.liouvillian.total, ket2dm(basis(3, 1)))
    np.testing.assert_allclose(out, 0.4 * np.diag([1, -1, 0]), atol=1e-15)


def _two_atom_by_index(H, g, ops, H_LS):
    """Generator entries written out one index at a time.

    Column-stacked index of ``|i><j|`` is ``i + 4 j``; the generator is
    ``-i[H, .] + sum_ab g_ab (A_b . A_a^+ - 1/2 {A_a^+ A_b, .})``.
    """
    n = 4
    K = H + H_LS
    L = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            row = i + n * j
            for k in range(n):
                for l in range(n):
                    col = k + n * l
                    val = 0.0
                    if l == j:
                        val += -1j * K[i, k]
                    if k == i:
                        val += 1j * K[l, j]
                    for a in range(2):
                        for b in range(2):
                            Aa, Ab = ops[a], ops[b]
                            M = Aa.conj().T @ Ab
                            val += g[a, b] * Ab[i, k] * np.conj(Aa[j, l])
                            if l == j:
                                val -= 0.5 * g[a, b] * M[i, k]
                            if k == i:
                                val -= 0.5 * g[a, b] * M[l, j]
                    L[row, col] = val
    return L


def test_two_atom_generator_matches_index_formula():
    gam, g12, s12 = 1.0, 0.7, 0.2
    sys = assemble(model_two_atoms(1.0, gam, g12, s12))
    sm1, sm2 = _two_atom_operators()
    g = np.array([[gam, g12], [g12, gam]])
    H_LS = s12 * (sm1.conj().T @ sm2 + sm2.conj().T @ sm1)
    ref = _two_atom_by_index(sys.model.H_S, g, [sm1, sm2], H_LS)
    np.testing.assert_allclose(sys.liouvillian.total, ref, atol=1e-13)


def test_parts_sum_to_total():
    sys = assemble(model_two_atoms(1.0, 1.0, 0.4, 0.3))
    L = sys.liouvillian
    np.testing.assert_allclose(sum(L.parts.values()), L.total, atol=1e-12)


def test_zero_frequency_dissipation_is_noted():
    H = np.diag([0.0, 1.0])
    d = decompose(np.diag([1.0, -1.0]), hermitian_eigensystem(H))
    t = SpectralTensor.from_rates({0.0: 0.2}, beta=math.inf)
    L = build_liouvillian(H, t, d)
    assert any("w=0" in n for n in L.notes)


def test_unmatched_tensor_entry_warns():
    t = SpectralTensor.from_rates({1.0: 1.0, 7.0: 0.5}, beta=math.inf)
    with pytest.warns(UserWarning, match="match no Bohr frequency"):
        build_liouvillian(np.diag([0.0, 1.0]), t, _qubit_decomposition())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 6))
def test_random_generator_properties(seed, dim):
    rng = np.random.default_rng(seed)
    model = random_t0_model(rng, dim, degenerate=bool(seed % 2))
    sys = assemble(model)
    L = sys.liouvillian.total
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    Y = apply_generator(L, X)
    assert abs(np.trace(Y)) <= 1e-10 * max(1.0, np.max(np.abs(X)))
    np.testing.assert_allclose(apply_generator(L, X.conj().T), Y.conj().T, atol=1e-12 * max(1, np.abs(L).max()))
    diag = diagonal_form_liouvillian(model.H_S, model.tensor, sys.decomposition)
    assert np.max(np.abs(diag - L)) <= 1e-12 * max(1.0, np.abs(L).max())
    assert energy_pair_violation(L, sys.spectrum, sys.decomposition.freq_tol) <= 1e-13 * max(1.0, np.abs(L).max())


def test_selection_rule_detects_absorption():
    m = model_damped_cavity(3, 1.0, 0.5, nbar=0.3)
    sys = assemble(m)
    assert energy_pair_violation(sys.liouvillian.total, sys.spectrum) > 1e-3


def test_energy_pair_order_is_lower_triangular():
    sys = assemble(model_damped_cavity(3, 1.0, 0.5))
    perm, block = energy_pair_order(sys.spectrum)
    V = sys.spectrum.eigenbasis
    S = np.kron(V.conj(), V)
    Le = (S.conj().T @ sys.liouvillian.total @ S)[np.ix_(perm, perm)]
    # anything above the diagonal blocks must vanish
    for r in range(len(perm)):
        for c in range(len(perm)):
            if c > r and block[c] != block[r]:
                assert abs(Le[r, c]) <= 1e-13


def test_gamma_diagonalization_deterministic():
    g = np.ones((2, 2))
    r, U = diagonalize_gamma(g)
    np.testing.assert_allclose(r, [2.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(U[:, 0], [1 / math.sqrt(2)] * 2, atol=1e-14)
    r2, U2 = diagonalize_gamma(g.copy())
    assert np.array_equal(U, U2)
    with pytest.raises(ValueError):
        diagonalize_gamma(-np.eye(2))
