import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hermitian, random_unitary
from qcascade.eigenops import cluster_bohr_frequencies, decompose, verify_algebra
from qcascade.operators import destroy, hermitian_eigensystem, sigma_minus, sigma_x, sigma_z


def _qubit(a):
    return decompose(a, hermitian_eigensystem(np.diag([0.0, 1.0])))


def test_qubit_sigma_x_lowering_at_positive_frequency():
    d = _qubit(sigma_x())
    np.testing.assert_allclose(sorted(d.frequencies), [-1.0, 1.0])
    np.testing.assert_allclose(d.op(0, 1.0), sigma_minus(), atol=1e-15)
    np.testing.assert_allclose(d.op(0, -1.0), sigma_minus().T, atol=1e-15)


def test_commuting_coupling_has_only_zero_frequency():
    d = _qubit(sigma_z())
    np.testing.assert_allclose(d.frequencies, [0.0])
    np.testing.assert_allclose(d.op(0, 0.0), sigma_z(), atol=1e-15)


def test_truncated_oscillator_ladder():
    a = destroy(4)
    d = decompose(a + a.T, hermitian_eigensystem(np.diag([0.0, 1, 2, 3])))
    np.testing.assert_allclose(d.frequencies, [-1.0, 1.0])
    np.testing.assert_allclose(d.op(0, 1.0), a, atol=1e-14)
    np.testing.assert_allclose(d.op(0, -1.0), a.T, atol=1e-14)
    # absent frequencies give zero
    assert not np.any(d.op(0, 2.0))


def test_non_hermitian_coupling_rejected():
    with pytest.raises(ValueError, match="Hermitian"):
        _qubit(sigma_minus())


def test_qubit_algebra_is_exact():
    assert _qubit(sigma_x()).ops and verify_algebra(_qubit(sigma_x())).worst() < 1e-14


def test_corrupted_map_reports_completeness_defect():
    d = _qubit(sigma_x())
    k = d.index(1.0)
    ops = dict(d.ops)
    ops[(0, k)] = 1.01 * ops[(0, k)]
    rep = verify_algebra(dataclasses.replace(d, ops=ops))
    assert rep.completeness == pytest.approx(0.01, rel=1e-9)


def test_bohr_frequencies_symmetric_and_clustered():
    freqs, pairs = cluster_bohr_frequencies([0.0, 1.0, 2.0 + 1e-12, 3.5], 1e-9)
    np.testing.assert_allclose(freqs, -freqs[::-1], atol=1e-11)
    k = int(np.argmin(np.abs(freqs - 1.0)))
    # 0->1 and 1->2 merge into one cluster
    assert sorted(pairs[k]) == [(0, 1), (1, 2)]
    for k, w in enumerate(freqs):
        for i, j in pairs[k]:
            assert abs([0.0, 1.0, 2.0, 3.5][j] - [0.0, 1.0, 2.0, 3.5][i] - w) < 1e-9


def _random_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    if rng.random() < 0.5:
        e = rng.integers(0, 4, size=n).astype(float)  # degenerate levels, equal Bohr gaps
    else:
        e = rng.uniform(-2, 2, size=n)
    U = random_unitary(rng, n)
    h = U @ np.diag(e) @ U.conj().T
    h = 0.5 * (h + h.conj().T)
    return h, [random_hermitian(rng, n) for _ in range(int(rng.integers(1, 3)))], rng


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_algebra_random_draws(seed):
    h, couplings, _ = _random_case(seed)
    d = decompose(couplings, hermitian_eigensystem(h))
    assert verify_algebra(d).worst() <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0, 10))
def test_interaction_picture_phase(seed, t):
    h, couplings, _ = _random_case(seed)
    d = decompose(couplings, hermitian_eigensystem(h))
    w, v = np.linalg.eigh(h)
    U = (v * np.exp(-1j * w * t)) @ v.conj().T
    for (alpha, k), op in d.ops.items():
        lhs = U.conj().T @ op @ U
        rhs = np.exp(-1j * d.frequencies[k] * t) * op
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(couplings[alpha])))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_frequency_set_symmetric(seed):
    h, couplings, _ = _random_case(seed)
    d = decompose(couplings, hermitian_eigensystem(h))
    for w in d.frequencies:
        assert d.index(-w) is not None


def test_zero_components_are_dropped():
    # a coupling diagonal in the eigenbasis has no w != 0 part
    d = decompose(np.diag([1.0, -2.0, 0.5]), hermitian_eigensystem(np.diag([0.0, 1.0, 3.0])))
    assert list(d.frequencies) == [0.0]
