"""Prebuilt open systems and the observables used to analyse them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cascade import effective_generator
from .eigenops import decompose
from .liouvillian import SpectralTensor, build_liouvillian, diagonalize_gamma
from .operators import (
    basis,
    destroy,
    embed,
    hermitian_eigensystem,
    ket2dm,
    require_density_matrix,
    require_hermitian,
    sigma_minus,
    sigma_x,
    sigma_y,
    sigma_z,
    tensor,
)

__all__ = [
    "ModelSpec",
    "OpenSystem",
    "assemble",
    "model_damped_qubit",
    "model_damped_cavity",
    "model_two_atoms",
    "model_n_atoms_cavity",
    "model_jaynes_cummings",
    "tavis_cummings_hamiltonian",
    "concurrence",
    "dfs_basis",
    "two_atom_state",
    "populations",
]

MAX_DIM = 4096


@dataclass
class ModelSpec:
    """Microscopic inputs of an open system.

    ``couplings`` is a list of ``(label, A)`` with Hermitian ``A``; the
    tensor's channel order follows it.
    """

    dims: list
    H_S: np.ndarray
    couplings: list
    tensor: SpectralTensor
    initial_state: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = int(np.prod(self.dims))
        self.H_S = require_hermitian(self.H_S, name="H_S")
        if self.H_S.shape != (n, n):
            raise ValueError(f"H_S has shape {self.H_S.shape}, dims {self.dims} imply {n}")
        for label, a in self.couplings:
            require_hermitian(a, name=f"coupling {label!r}")
            if np.shape(a) != (n, n):
                raise ValueError(f"coupling {label!r} has shape {np.shape(a)}, expected {(n, n)}")
        if self.tensor.channel_count != len(self.couplings):
            raise ValueError(
                f"tensor has {self.tensor.channel_count} channels but {len(self.couplings)} couplings were given"
            )
        self.initial_state = require_density_matrix(self.initial_state, name="initial state")
        if self.initial_state.shape != (n, n):
            raise ValueError(f"initial state has shape {self.initial_state.shape}, expected {(n, n)}")

    @property
    def dim(self):
        return self.H_S.shape[0]

    @property
    def labels(self):
        return [lab for lab, _ in self.couplings]


@dataclass(frozen=True)
class OpenSystem:
    """A model with its spectrum, eigenoperators and generator worked out."""

    model: ModelSpec
    spectrum: object
    decomposition: object
    liouvillian: object
    drop_lamb_shift: bool = False

    @property
    def tensor(self):
        return self.model.tensor

    @property
    def H0(self):
        return self.model.H_S + self.liouvillian.H_LS

    def generator(self):
        return effective_generator(self.H0, self.tensor, self.decomposition)

    def gamma_max(self):
        return self.tensor.max_rate()


def assemble(model, drop_lamb_shift=False, cluster_tol=None, freq_tol=None):
    sp = hermitian_eigensystem(model.H_S, cluster_tol)
    d = decompose([a for _, a in model.couplings], sp, freq_tol)
    L = build_liouvillian(model.H_S, model.tensor, d, drop_lamb_shift=drop_lamb_shift)
    return OpenSystem(model, sp, d, L, drop_lamb_shift)


def _positive_frequencies(H_S, couplings):
    sp = hermitian_eigensystem(H_S)
    d = decompose(couplings, sp)
    return [float(w) for w in d.frequencies if w > d.freq_tol]


def _flat_tensor(freqs, rates, shifts=None):
    n = len(rates)
    g = np.diag(np.asarray(rates, dtype=complex))
    s = np.zeros((n, n), dtype=complex) if shifts is None else np.asarray(shifts, dtype=complex)
    return SpectralTensor({w: (g, s) for w in freqs}, channel_count=n, beta=math.inf)


def model_damped_qubit(omega=1.0, kappa=1.0, initial="e"):
    """Two-level emitter ``H = omega |e><e|`` coupled through ``sigma_x``."""
    H = omega * np.diag([0.0, 1.0]).astype(complex)
    tensor = SpectralTensor.from_rates({omega: kappa}, beta=math.inf)
    psi = _qubit_label(initial)
    return ModelSpec([2], H, [("sx", sigma_x())], tensor, ket2dm(psi), {"name": "damped_qubit"})


def _qubit_label(label):
    table = {"g": basis(2, 0), "e": basis(2, 1), "+": np.array([1, 1]) / np.sqrt(2), "-": np.array([1, -1]) / np.sqrt(2)}
    if label not in table:
        raise ValueError(f"unknown qubit state {label!r}; use one of {sorted(table)}")
    return table[label].astype(complex)


def model_damped_cavity(n_max, omega_c, kappa, initial=None, nbar=0.0):
    """Single lossy mode ``H = omega_c a^+ a`` truncated at ``n_max`` photons.

    The coupling is the field quadrature ``a + a^+``; at zero temperature the
    only rate is ``gamma(omega_c) = kappa``.  A positive ``nbar`` gives the
    thermal tensor ``gamma(omega_c) = kappa (nbar + 1)``,
    ``gamma(-omega_c) = kappa nbar``, usable only by the reference integrators.
    ``initial`` is a Fock number (default ``n_max``) or a density matrix.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    a = destroy(n_max + 1)
    H = omega_c * (a.conj().T @ a)
    if nbar > 0:
        beta = math.log1p(1.0 / nbar) / omega_c
        tensor = SpectralTensor.from_rates({omega_c: kappa * (nbar + 1), -omega_c: kappa * nbar}, beta=beta)
    else:
        tensor = SpectralTensor.from_rates({omega_c: kappa}, beta=math.inf)
    rho0 = _initial(initial if initial is not None else n_max, n_max + 1)
    meta = {"name": "damped_cavity", "n_max": n_max, "omega_c": omega_c, "kappa": kappa}
    return ModelSpec([n_max + 1], H, [("x", a + a.conj().T)], tensor, rho0, meta)


def _initial(initial, n):
    if isinstance(initial, (int, np.integer)):
        if not 0 <= initial < n:
            raise ValueError(f"basis index {initial} outside dimension {n}")
        return ket2dm(basis(n, int(initial)))
    arr = np.asarray(initial, dtype=complex)
    if arr.ndim == 1:
        return ket2dm(arr / np.linalg.norm(arr))
    return arr


def two_atom_state(label):
    """Named two-atom states: ``gg, ge, eg, ee, singlet, triplet``.

    The first letter refers to atom 1; ``|e>`` is index 1 of each atom.
    """
    g, e = basis(2, 0), basis(2, 1)
    named = {
        "gg": tensor(g, g),
        "ge": tensor(g, e),
        "eg": tensor(e, g),
        "ee": tensor(e, e),
        "singlet": (tensor(e, g) - tensor(g, e)) / np.sqrt(2),
        "triplet": (tensor(e, g) + tensor(g, e)) / np.sqrt(2),
    }
    if label not in named:
        raise ValueError(f"unknown two-atom state {label!r}; use one of {sorted(named)}")
    return named[label]


def model_two_atoms(omega0, gamma, gamma12, s12, initial="ee"):
    """Two identical emitters sharing a zero-temperature reservoir.

    ``H_S = (omega0/2)(sz1 + sz2)``, couplings ``sx1, sx2``, collective rates
    ``gamma(omega0) = [[gamma, gamma12], [gamma12, gamma]]`` and exchange
    shifts ``S(omega0) = [[0, s12], [s12, 0]]``.
    """
    if abs(gamma12) > gamma + 1e-15:
        raise ValueError(f"|gamma12| = {abs(gamma12)} exceeds gamma = {gamma}; the rate matrix is not positive")
    dims = [2, 2]
    H = 0.5 * omega0 * (embed(sigma_z(), dims, 0) + embed(sigma_z(), dims, 1))
    couplings = [("sx1", embed(sigma_x(), dims, 0)), ("sx2", embed(sigma_x(), dims, 1))]
    g = np.array([[gamma, gamma12], [gamma12, gamma]], dtype=complex)
    s = np.array([[0, s12], [s12, 0]], dtype=complex)
    tensor = SpectralTensor({omega0: (g, s)}, channel_count=2, beta=math.inf)
    rho0 = ket2dm(two_atom_state(initial)) if isinstance(initial, str) else _initial(initial, 4)
    meta = {"name": "two_atoms", "omega0": omega0, "gamma": gamma, "gamma12": gamma12, "s12": s12}
    return ModelSpec(dims, H, couplings, tensor, rho0, meta)


def tavis_cummings_hamiltonian(N, g, omega, n_max):
    """``omega a^+a + omega sum_i s+_i s-_i + sum_i g_i (a^+ s-_i + a s+_i)``; atoms first, mode last."""
    g = np.broadcast_to(np.asarray(g, dtype=float), (N,))
    dims = [2] * N + [n_max + 1]
    a = embed(destroy(n_max + 1), dims, N)
    H = omega * a.conj().T @ a
    for i in range(N):
        sm = embed(sigma_minus(), dims, i)
        H = H + omega * sm.conj().T @ sm + g[i] * (a.conj().T @ sm + a @ sm.conj().T)
    return dims, H


def model_n_atoms_cavity(N, g, omega, kappa, gamma_at, n_max=None, initial=None):
    """``N`` two-level atoms in a lossy single-mode cavity (Tavis-Cummings).

    Dissipation enters through the cavity quadrature ``a + a^+`` (rate
    ``kappa``) and each atom's ``sx`` (rate ``gamma_at``, independent
    reservoirs), with flat rates at every emission frequency of the dressed
    spectrum.  The default initial state has all atoms excited and the cavity
    empty.
    """
    if N < 1:
        raise ValueError("need at least one atom")
    n_max = N if n_max is None else n_max
    dim = 2**N * (n_max + 1)
    if dim > MAX_DIM:
        raise ValueError(f"Hilbert dimension {dim} exceeds the limit {MAX_DIM}")
    dims, H = tavis_cummings_hamiltonian(N, g, omega, n_max)
    a = embed(destroy(n_max + 1), dims, N)
    couplings = [("cavity", a + a.conj().T)] + [(f"atom{i + 1}", embed(sigma_x(), dims, i)) for i in range(N)]
    freqs = _positive_frequencies(H, [c for _, c in couplings])
    tensor = _flat_tensor(freqs, [kappa] + [gamma_at] * N)
    if initial is None:
        if n_max < N:
            raise ValueError(f"photon truncation n_max={n_max} is below the {N} initial excitations")
        rho0 = ket2dm(tensor_product_state([1] * N + [0], dims))
    else:
        rho0 = _initial(initial, dim)
    meta = {"name": "n_atoms_cavity", "N": N, "g": list(np.broadcast_to(g, (N,))), "omega": omega,
            "kappa": kappa, "gamma_at": gamma_at, "n_max": n_max}
    return ModelSpec(dims, H, couplings, tensor, rho0, meta)


def model_jaynes_cummings(n_max, omega, g, kappa, gamma_at, initial=None):
    """One atom in a lossy cavity; the ``N = 1`` case of :func:`model_n_atoms_cavity`."""
    return model_n_atoms_cavity(1, [g], omega, kappa, gamma_at, n_max=n_max, initial=initial)


def tensor_product_state(levels, dims):
    return tensor(*[basis(dk, lk) for lk, dk in zip(levels, dims)])


def populations(states):
    """Diagonal of each density matrix in a stack."""
    return np.real(np.diagonal(np.asarray(states), axis1=-2, axis2=-1))


_YY = np.kron(sigma_y(), sigma_y())


def concurrence(rho, tol=1e-8):
    """Wootters concurrence of a two-qubit density matrix."""
    rho = require_density_matrix(rho, tol=tol, name="two-qubit state")
    if rho.shape != (4, 4):
        raise ValueError(f"concurrence needs a 4x4 state, got {rho.shape}")
    flipped = _YY @ rho.conj() @ _YY
    ev = np.linalg.eigvals(rho @ flipped)
    lam = np.sort(np.sqrt(np.clip(ev.real, 0.0, None)))[::-1]
    return float(np.clip(lam[0] - lam[1] - lam[2] - lam[3], 0.0, 1.0))


def dfs_basis(d, t, H_eff, tol=1e-10):
    """Orthonormal basis of the decoherence-free subspace.

    Starts from the joint kernel of every emission channel (the kernel of
    ``H'``) and shrinks it to the largest subspace mapped into itself by
    ``H_eff``.  Returned as the columns of a ``(d, k)`` array.
    """
    if not t.is_zero_temperature:
        raise ValueError("decoherence-free subspaces are defined here for zero-temperature tensors")
    dim = d.dim
    channels = []
    from .cascade import _dissipative_terms

    for k, g in _dissipative_terms(t, d, positive_only=True):
        rates, U = diagonalize_gamma(g)
        ops = d.ops_at(k)
        for j, r in enumerate(rates):
            if r > 0:
                channels.append(np.sqrt(r) * sum(U[b, j].conj() * ops[b] for b in range(len(ops))))
    H_eff = np.asarray(H_eff, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(H_eff))))
    if channels:
        stacked = np.vstack(channels)
        Q = scipy.linalg.null_space(stacked, rcond=tol)
    else:
        Q = np.eye(dim, dtype=complex)
    while Q.shape[1]:
        leak = H_eff @ Q - Q @ (Q.conj().T @ H_eff @ Q)
        if np.max(np.abs(leak), initial=0.0) <= tol * scale:
            break
        keep = scipy.linalg.null_space(leak, rcond=tol)
        if keep.shape[1] == Q.shape[1]:
            break
        Q = scipy.linalg.orth(Q @ keep) if keep.shape[1] else Q[:, :0]
    # present an H_eff eigenbasis of the subspace
    if Q.shape[1]:
        w, v = np.linalg.eigh(Q.conj().T @ H_eff @ Q)
        Q = Q @ v
    return Q
