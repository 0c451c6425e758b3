"""Dense operator algebra on a finite Hilbert space.

Operators are plain complex ``numpy`` arrays of shape ``(d, d)``.  Subsystem
structure, when it matters, is carried separately as a list of dimensions.
Superoperators act on column-stacked density matrices: ``vec(A X B) =
(B.T kron A) vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

__all__ = [
    "Spectrum",
    "hermitian_eigensystem",
    "matrix_exponential",
    "partial_trace",
    "hermiticity_error",
    "require_hermitian",
    "require_density_matrix",
    "tensor",
    "vec",
    "unvec",
    "spre",
    "spost",
    "sprepost",
    "commutator_superop",
    "destroy",
    "sigma_minus",
    "sigma_z",
    "sigma_x",
    "sigma_y",
    "embed",
    "basis",
    "ket2dm",
]


def hermiticity_error(m):
    """Largest entry of ``|M - M^dagger|``."""
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _scale(m):
    return float(np.max(np.abs(m))) if m.size else 0.0


def require_hermitian(m, rtol=1e-10, name="operator"):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    err = hermiticity_error(m)
    if err > rtol * max(_scale(m), 1e-300):
        raise ValueError(f"{name} is not Hermitian: max|M - M^dagger| = {err:.3e}")
    return m


def require_density_matrix(rho, tol=1e-10, name="state"):
    """Validate unit trace, Hermiticity and positivity (within ``tol``)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {rho.shape}")
    if hermiticity_error(rho) > tol:
        raise ValueError(f"{name} is not Hermitian (deviation {hermiticity_error(rho):.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValueError(f"{name} does not have unit trace (trace {tr.real:.12g})")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -tol:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {lo:.3e})")
    return rho


@dataclass(frozen=True)
class Spectrum:
    """Distinct eigenvalues of a Hermitian operator with their eigenspaces.

    ``bases[k]`` is a ``(d, multiplicities[k])`` isometry spanning the
    eigenspace of ``energies[k]``; ``projectors[k] = bases[k] @ bases[k]^dagger``.
    Energies are ascending.
    """

    energies: np.ndarray
    bases: tuple
    cluster_tol: float

    @property
    def dim(self):
        return self.bases[0].shape[0]

    @property
    def multiplicities(self):
        return [b.shape[1] for b in self.bases]

    @property
    def projectors(self):
        return [b @ b.conj().T for b in self.bases]

    @property
    def eigenbasis(self):
        """Unitary whose columns are the eigenvectors, grouped by energy."""
        return np.hstack(self.bases)

    def labels(self):
        """Sector index of every column of :attr:`eigenbasis`."""
        return np.repeat(np.arange(len(self.energies)), self.multiplicities)

    def __len__(self):
        return len(self.energies)


def hermitian_eigensystem(m, cluster_tol=None):
    """Spectral decomposition with degenerate eigenvalues merged.

    Eigenvalues closer than ``cluster_tol`` to their sorted neighbour are
    merged into a single energy (the cluster mean).  The default tolerance is
    ``1e-9`` times the spectral range.
    """
    m = require_hermitian(m, name="matrix")
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    if cluster_tol is None:
        cluster_tol = 1e-9 * max(w[-1] - w[0], np.max(np.abs(w)), 1e-300)
    if cluster_tol <= 0:
        raise ValueError("cluster_tol must be positive")
    breaks = np.flatnonzero(np.diff(w) > cluster_tol) + 1
    groups = np.split(np.arange(len(w)), breaks)
    energies = np.array([w[g].mean() for g in groups])
    bases = tuple(v[:, g] for g in groups)
    return Spectrum(energies=energies, bases=bases, cluster_tol=float(cluster_tol))


def matrix_exponential(m, t=1.0):
    """``exp(M t)`` by scaling and squaring (Pade)."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    out = scipy.linalg.expm(m * t)
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"exp(M t) overflowed at t={t!r} (||M t||_1 = {np.linalg.norm(m * t, 1):.3e})")
    return out


def partial_trace(rho, dims, keep):
    """Trace out every subsystem not listed in ``keep``.

    The kept subsystems appear in ascending order in the result.
    """
    rho = np.asarray(rho)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise ValueError(f"dimensions must be positive, got {dims}")
    n = int(np.prod(dims))
    if rho.shape != (n, n):
        raise ValueError(f"dims {dims} imply a {n}x{n} operator, got {rho.shape}")
    keep = sorted({int(k) for k in np.atleast_1d(keep)})
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    nsys = len(dims)
    t = rho.reshape(dims + dims)
    traced = [k for k in range(nsys) if k not in keep]
    # contract from the highest axis so lower axis numbers stay valid
    for k in sorted(traced, reverse=True):
        nk = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + nk)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(dk, dk)


def tensor(*ops):
    return reduce(np.kron, ops)


def vec(x):
    return np.asarray(x).reshape(-1, order="F")


def unvec(v, d=None):
    """Inverse of :func:`vec`; a leading batch axis is allowed."""
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.shape[-1])))
    # C-order reshape of a column-stacked vector gives the transpose
    return np.swapaxes(v.reshape(v.shape[:-1] + (d, d)), -1, -2)


def spre(a):
    """Superoperator of ``X -> A X``."""
    a = np.asarray(a)
    return np.kron(np.eye(a.shape[0]), a)


def spost(b):
    """Superoperator of ``X -> X B``."""
    b = np.asarray(b)
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a, b):
    """Superoperator of ``X -> A X B``."""
    return np.kron(np.asarray(b).T, np.asarray(a))


def commutator_superop(h):
    """Superoperator of ``X -> -i [H, X]``."""
    return -1j * (spre(h) - spost(h))


def destroy(n):
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


# two-level convention: index 0 = ground |g>, index 1 = excited |e>
def sigma_minus():
    return np.array([[0, 1], [0, 0]], dtype=complex)


def sigma_z():
    return np.diag([-1.0, 1.0]).astype(complex)


def sigma_x():
    return np.array([[0, 1], [1, 0]], dtype=complex)


def sigma_y():
    return np.array([[0, -1j], [1j, 0]], dtype=complex)


def embed(op, dims, site):
    """Place ``op`` on subsystem ``site`` of a tensor product."""
    mats = [np.eye(d, dtype=complex) for d in dims]
    mats[site] = np.asarray(op, dtype=complex)
    return tensor(*mats)


def basis(d, k):
    v = np.zeros(d, dtype=complex)
    v[k] = 1.0
    return v


def ket2dm(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())
