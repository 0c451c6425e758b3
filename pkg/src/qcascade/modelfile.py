"""Reading model descriptions from YAML files.

Two forms are accepted.  A builtin reference::

    model: two_atoms(omega0=1, gamma=1, gamma12=1, s12=0.2)
    initial: eg            # optional, forwarded as ``initial=``

or explicit matrices, complex entries written as ``[re, im]`` pairs (plain
numbers are read as real), rows in order::

    dims: [2]
    temperature: zero      # or {beta: 2.0}
    hamiltonian:
      - [[0, 0], [0, 0]]
      - [[0, 0], [1, 0]]
    couplings:
      - label: sx
        matrix:
          - [0, 1]
          - [1, 0]
    tensor:
      - omega: 1.0
        gamma: [[1.0]]
        S: [[0.0]]
    initial_state:
      basis: 1             # or vector: [...] or matrix: [[...], ...]

Every validation error carries the line number of the offending entry.
"""

from __future__ import annotations

import ast
import math

import numpy as np
import yaml

from . import models
from .liouvillian import HERM_TOL, PSD_TOL, SpectralTensor
from .operators import hermiticity_error, ket2dm

__all__ = ["ModelFileError", "parse_model", "load_model", "BUILTINS"]


class ModelFileError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


BUILTINS = {
    "damped_qubit": models.model_damped_qubit,
    "damped_cavity": models.model_damped_cavity,
    "two_atoms": models.model_two_atoms,
    "n_atoms_cavity": models.model_n_atoms_cavity,
    "jaynes_cummings": models.model_jaynes_cummings,
}

# keyword spellings with Greek letters
_ALIASES = {
    "ω0": "omega0",
    "ω": "omega",
    "ω_c": "omega_c",
    "ωc": "omega_c",
    "γ": "gamma",
    "γ12": "gamma12",
    "γ_at": "gamma_at",
    "κ": "kappa",
    "n̄": "nbar",
}


def _line(node):
    return node.start_mark.line + 1


def _mapping(node, what):
    if not isinstance(node, yaml.MappingNode):
        raise ModelFileError(f"{what} must be a mapping", _line(node))
    out = {}
    for k, v in node.value:
        out[k.value] = v
    return out


def _seq(node, what):
    if not isinstance(node, yaml.SequenceNode):
        raise ModelFileError(f"{what} must be a list", _line(node))
    return node.value


def _real(node, what):
    if not isinstance(node, yaml.ScalarNode):
        raise ModelFileError(f"{what}: expected a number", _line(node))
    try:
        return float(node.value)
    except ValueError:
        raise ModelFileError(f"{what}: malformed number {node.value!r}", _line(node)) from None


def _complex(node, what):
    if isinstance(node, yaml.SequenceNode):
        if len(node.value) != 2:
            raise ModelFileError(f"{what}: complex entries are [re, im] pairs", _line(node))
        return complex(_real(node.value[0], what), _real(node.value[1], what))
    return complex(_real(node, what), 0.0)


def _matrix(node, what, n=None):
    rows = _seq(node, what)
    mat = [[_complex(x, what) for x in _seq(r, f"{what} row")] for r in rows]
    if any(len(r) != len(mat) for r in mat):
        raise ModelFileError(f"{what} must be square", _line(node))
    m = np.array(mat, dtype=complex).reshape(len(mat), len(mat))
    if n is not None and m.shape != (n, n):
        raise ModelFileError(f"{what} has shape {m.shape}, expected {(n, n)}", _line(node))
    return m


def _vector(node, what, n):
    v = np.array([_complex(x, what) for x in _seq(node, what)], dtype=complex)
    if v.shape != (n,):
        raise ModelFileError(f"{what} has length {len(v)}, expected {n}", _line(node))
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ModelFileError(f"{what} is the zero vector", _line(node))
    return v / nrm


def _hermitian(m, what, node):
    scale = max(1.0, float(np.max(np.abs(m))))
    if hermiticity_error(m) > 1e-10 * scale:
        raise ModelFileError(f"{what} is not Hermitian (max|M - M^+| = {hermiticity_error(m):.3e})", _line(node))
    return 0.5 * (m + m.conj().T)


def _parse_builtin(text_node, extra):
    src = text_node.value
    try:
        call = ast.parse(src.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ModelFileError(f"cannot parse model reference {src!r}: {exc.msg}", _line(text_node)) from None
    if not isinstance(call, ast.Call) or not isinstance(call.func, ast.Name):
        raise ModelFileError(f"model reference must look like name(key=value, ...), got {src!r}", _line(text_node))
    name = call.func.id
    if name not in BUILTINS:
        raise ModelFileError(f"unknown builtin model {name!r}; choose from {sorted(BUILTINS)}", _line(text_node))
    if call.args:
        raise ModelFileError("builtin model arguments must be given by keyword", _line(text_node))
    kwargs = {}
    for kw in call.keywords:
        try:
            kwargs[_ALIASES.get(kw.arg, kw.arg)] = ast.literal_eval(kw.value)
        except ValueError:
            raise ModelFileError(f"argument {kw.arg!r} must be a literal", _line(text_node)) from None
    kwargs.update(extra)
    try:
        return BUILTINS[name](**kwargs)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{name}: {exc}", _line(text_node)) from None


def parse_model(text):
    """Parse a model description and run all physical checks on it."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ModelFileError(f"malformed YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from None
    if root is None:
        raise ModelFileError("empty model file")
    top = _mapping(root, "model file")

    if "model" in top:
        extra = {}
        if "initial" in top:
            node = top["initial"]
            val = yaml.safe_load(yaml.serialize(node))
            extra["initial"] = val
        return _parse_builtin(top["model"], extra)

    for key in ("dims", "hamiltonian", "couplings", "tensor", "initial_state"):
        if key not in top:
            raise ModelFileError(f"missing section {key!r}", _line(root))
    dims = [int(_real(x, "dims")) for x in _seq(top["dims"], "dims")]
    if not dims or any(d < 1 for d in dims):
        raise ModelFileError("dims must be positive integers", _line(top["dims"]))
    n = int(np.prod(dims))
    H = _hermitian(_matrix(top["hamiltonian"], "hamiltonian", n), "hamiltonian", top["hamiltonian"])

    couplings = []
    for i, cnode in enumerate(_seq(top["couplings"], "couplings")):
        c = _mapping(cnode, "coupling")
        if "matrix" not in c:
            raise ModelFileError("coupling needs a 'matrix'", _line(cnode))
        label = c["label"].value if "label" in c else f"A{i}"
        A = _hermitian(_matrix(c["matrix"], f"coupling {label!r}", n), f"coupling {label!r}", c["matrix"])
        couplings.append((label, A))
    nch = len(couplings)
    if nch == 0:
        raise ModelFileError("at least one coupling is required", _line(top["couplings"]))

    beta = math.inf
    if "temperature" in top:
        tnode = top["temperature"]
        if isinstance(tnode, yaml.ScalarNode):
            if tnode.value.strip().lower() != "zero":
                raise ModelFileError("temperature must be 'zero' or {beta: value}", _line(tnode))
        else:
            beta = _real(_mapping(tnode, "temperature")["beta"], "beta")
            if beta <= 0:
                raise ModelFileError("beta must be positive", _line(tnode))

    entries = {}
    for enode in _seq(top["tensor"], "tensor"):
        e = _mapping(enode, "tensor entry")
        if "omega" not in e:
            raise ModelFileError("tensor entry needs 'omega'", _line(enode))
        w = _real(e["omega"], "omega")
        zero = np.zeros((nch, nch), dtype=complex)
        g = _matrix(e["gamma"], "gamma", nch) if "gamma" in e else zero
        s = _matrix(e["S"], "S", nch) if "S" in e else zero
        where = e.get("gamma", enode)
        if hermiticity_error(g) > HERM_TOL * max(1.0, float(np.max(np.abs(g)))):
            raise ModelFileError(f"gamma({w:g}) is not Hermitian", _line(where))
        if hermiticity_error(s) > HERM_TOL * max(1.0, float(np.max(np.abs(s)))):
            raise ModelFileError(f"S({w:g}) is not Hermitian", _line(e.get("S", enode)))
        lo = np.linalg.eigvalsh(0.5 * (g + g.conj().T))[0]
        if lo < -PSD_TOL:
            raise ModelFileError(f"gamma({w:g}) is not positive semidefinite (min eigenvalue {lo:.3e})", _line(where))
        if beta == math.inf and w < 0 and np.any(g != 0):
            raise ModelFileError(
                f"gamma({w:g}) is nonzero but temperature is zero: at T=0 the absorption rates "
                "gamma(omega < 0) must vanish (zero-temperature detailed balance)",
                _line(where),
            )
        if w in entries:
            raise ModelFileError(f"duplicate tensor entry at omega={w:g}", _line(enode))
        entries[w] = (g, s)
    tensor = SpectralTensor(entries, channel_count=nch, beta=beta)

    inode = top["initial_state"]
    init = _mapping(inode, "initial_state")
    if "basis" in init:
        k = int(_real(init["basis"], "basis"))
        if not 0 <= k < n:
            raise ModelFileError(f"basis index {k} outside dimension {n}", _line(init["basis"]))
        rho0 = np.zeros((n, n), dtype=complex)
        rho0[k, k] = 1.0
    elif "vector" in init:
        rho0 = ket2dm(_vector(init["vector"], "initial vector", n))
    elif "matrix" in init:
        rho0 = _hermitian(_matrix(init["matrix"], "initial matrix", n), "initial matrix", init["matrix"])
    else:
        raise ModelFileError("initial_state needs one of basis, vector, matrix", _line(inode))
    name = top["name"].value if "name" in top else "explicit"
    try:
        return models.ModelSpec(dims, H, couplings, tensor, rho0, {"name": name})
    except ValueError as exc:
        raise ModelFileError(str(exc), _line(inode)) from None


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
