import math
import pathlib

import numpy as np
import pytest

from qcascade.modelfile import ModelFileError, load_model, parse_model
from qcascade.models import model_damped_cavity, model_two_atoms

MODELS = pathlib.Path(__file__).resolve().parents[1] / "models"

QUBIT = """\
dims: [2]
temperature: zero
hamiltonian:
  - [0, 0]
  - [0, 1]
couplings:
  - label: sx
    matrix:
      - [0, 1]
      - [1, 0]
tensor:
  - omega: 1.0
    gamma: [[0.5]]
    S: [[0.1]]
initial_state:
  basis: 1
"""


def _replace(text, old, new):
    assert old in text
    return text.replace(old, new, 1)


def test_sample_qubit_file():
    m = load_model(MODELS / "damped_qubit.yaml")
    assert m.dim == 2 and m.labels == ["sx"]
    assert m.tensor.gamma(1.0)[0, 0] == pytest.approx(1.0)
    assert m.tensor.beta == math.inf
    np.testing.assert_allclose(m.initial_state, np.diag([0, 1]))


@pytest.mark.parametrize("path", sorted(MODELS.glob("*.yaml")), ids=lambda p: p.name)
def test_every_sample_parses(path):
    assert load_model(path).dim >= 2


def test_plain_real_entries():
    m = parse_model(QUBIT)
    np.testing.assert_allclose(m.H_S, np.diag([0, 1]))
    g, s = m.tensor.entries[1.0]
    assert g[0, 0] == 0.5 and s[0, 0] == 0.1


def test_complex_pairs_and_vector_initial_state():
    text = _replace(QUBIT, "  basis: 1", "  vector: [[1, 0], [0, 1]]")
    text = _replace(text, "      - [0, 1]\n      - [1, 0]", "      - [0, [0, -1]]\n      - [[0, 1], 0]")
    m = parse_model(text)
    np.testing.assert_allclose(m.couplings[0][1], [[0, -1j], [1j, 0]])
    np.testing.assert_allclose(m.initial_state, np.array([[1, -1j], [1j, 1]]) / 2)


def test_matrix_initial_state_and_beta():
    text = _replace(QUBIT, "  basis: 1", "  matrix:\n    - [0.25, 0]\n    - [0, 0.75]")
    text = _replace(text, "temperature: zero", "temperature: {beta: 2.0}")
    m = parse_model(text)
    assert m.tensor.beta == 2.0
    np.testing.assert_allclose(np.diag(m.initial_state).real, [0.25, 0.75])


def _error(text):
    with pytest.raises(ModelFileError) as info:
        parse_model(text)
    return info.value


def test_absorption_at_zero_temperature_is_refused():
    text = _replace(QUBIT, "    S: [[0.1]]\n", "    S: [[0.1]]\n  - omega: -1.0\n    gamma: [[0.2]]\n")
    err = _error(text)
    assert "zero-temperature" in str(err) and err.line == 16


def test_non_hermitian_hamiltonian_has_line():
    err = _error(_replace(QUBIT, "  - [0, 0]\n  - [0, 1]", "  - [0, 1]\n  - [0, 1]"))
    assert "Hermitian" in str(err) and err.line == 4


def test_malformed_number_has_line():
    err = _error(_replace(QUBIT, "gamma: [[0.5]]", "gamma: [[zero.5]]"))
    assert "malformed" in str(err) and err.line == 13


def test_negative_rate_matrix():
    err = _error(_replace(QUBIT, "gamma: [[0.5]]", "gamma: [[-0.5]]"))
    assert "positive semidefinite" in str(err) and err.line == 13


def test_shape_mismatch():
    err = _error(_replace(QUBIT, "dims: [2]", "dims: [3]"))
    assert "expected (3, 3)" in str(err)


@pytest.mark.parametrize(
    "text,needle",
    [
        ("", "empty"),
        ("dims: [2\n", "malformed YAML"),
        ("dims: [2]\n", "missing section"),
        ("model: nothing(a=1)\n", "unknown builtin"),
        ("model: two_atoms(1, 1, 1, 0)\n", "keyword"),
        ("model: two_atoms(omega0=1, gamma=1, gamma12=2, s12=0)\n", "positive"),
        ("model: two_atoms(omega0=x)\n", "literal"),
        ("- 1\n- 2\n", "mapping"),
    ],
)
def test_rejections(text, needle):
    assert needle in str(_error(text))


def test_basis_index_out_of_range():
    err = _error(_replace(QUBIT, "basis: 1", "basis: 2"))
    assert "outside" in str(err) and err.line == 16


def test_builtin_matches_constructor():
    m = parse_model("model: two_atoms(ω0=1, γ=1, γ12=1, s12=0.2)\n")
    ref = model_two_atoms(1, 1, 1, 0.2)
    np.testing.assert_allclose(m.H_S, ref.H_S)
    assert m.labels == ref.labels
    for (_, a), (_, b) in zip(m.couplings, ref.couplings):
        np.testing.assert_allclose(a, b)
    assert list(m.tensor.entries) == list(ref.tensor.entries)
    for w in ref.tensor.entries:
        for x, y in zip(m.tensor.entries[w], ref.tensor.entries[w]):
            np.testing.assert_allclose(x, y)
    np.testing.assert_allclose(m.initial_state, ref.initial_state)


def test_builtin_initial_is_forwarded():
    m = parse_model("model: damped_cavity(n_max=3, ω_c=1.0, κ=0.5)\ninitial: 1\n")
    np.testing.assert_allclose(m.initial_state, model_damped_cavity(3, 1.0, 0.5, initial=1).initial_state)
    m = parse_model("model: two_atoms(omega0=1, gamma=1, gamma12=0.5, s12=0)\ninitial: singlet\n")
    assert m.initial_state[1, 2] == pytest.approx(-0.5)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_model(MODELS / "does_not_exist.yaml")
