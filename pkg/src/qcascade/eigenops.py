"""Eigenoperator (Bohr-frequency) decomposition of system coupling operators.

For a Hermitian coupling ``A`` and system Hamiltonian with spectral projectors
``P(e)``, the component at Bohr frequency ``w`` is

    A(w) = sum_{e' - e = w} P(e) A P(e')

so that ``[H, A(w)] = -w A(w)``: components with ``w > 0`` lower the energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import Spectrum, require_hermitian

__all__ = ["BohrDecomposition", "AlgebraReport", "decompose", "verify_algebra", "cluster_bohr_frequencies"]


def _maxabs(m):
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


@dataclass(frozen=True)
class BohrDecomposition:
    """Eigenoperators ``A_alpha(w)`` of a set of couplings.

    ``ops`` maps ``(alpha, k)`` to ``A_alpha(frequencies[k])``; vanishing
    components are absent.  ``pairs[k]`` lists the sector index pairs
    ``(i, j)`` with ``energies[j] - energies[i] = frequencies[k]``.
    """

    spectrum: Spectrum
    couplings: tuple
    frequencies: np.ndarray
    pairs: tuple
    ops: dict
    freq_tol: float

    @property
    def n_channels(self):
        return len(self.couplings)

    @property
    def dim(self):
        return self.spectrum.dim

    def index(self, omega, tol=None):
        """Index of the clustered frequency matching ``omega``, or ``None``."""
        tol = self.freq_tol if tol is None else tol
        if len(self.frequencies) == 0:
            return None
        k = int(np.argmin(np.abs(self.frequencies - omega)))
        return k if abs(self.frequencies[k] - omega) <= tol else None

    def op(self, alpha, omega):
        """``A_alpha(omega)``, zero if the component vanishes."""
        k = self.index(omega)
        if k is None:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return self.ops.get((alpha, k), np.zeros((self.dim, self.dim), dtype=complex))

    def ops_at(self, k):
        """List over channels of the operators at frequency index ``k``."""
        zero = np.zeros((self.dim, self.dim), dtype=complex)
        return [self.ops.get((a, k), zero) for a in range(self.n_channels)]

    def positive(self):
        return [k for k, w in enumerate(self.frequencies) if w > self.freq_tol]


def cluster_bohr_frequencies(energies, freq_tol):
    """Group all pairwise energy differences into clustered Bohr frequencies.

    Returns ``(frequencies, pairs)`` where ``pairs[k]`` lists ``(i, j)`` with
    ``energies[j] - energies[i]`` in cluster ``k``.  The set is symmetric
    under ``w -> -w`` by construction.
    """
    e = np.asarray(energies, dtype=float)
    n = len(e)
    up = [(e[j] - e[i], i, j) for i in range(n) for j in range(i + 1, n)]
    up.sort()
    zero_pairs = [(i, i) for i in range(n)]
    pos_groups = []
    for diff, i, j in up:
        if diff <= freq_tol:
            zero_pairs += [(i, j), (j, i)]
        elif pos_groups and diff - pos_groups[-1][-1][0] <= freq_tol:
            pos_groups[-1].append((diff, i, j))
        else:
            pos_groups.append([(diff, i, j)])
    freqs = [0.0]
    pairs = [tuple(zero_pairs)]
    for g in pos_groups:
        w = float(np.mean([x[0] for x in g]))
        freqs += [w, -w]
        pairs += [tuple((i, j) for _, i, j in g), tuple((j, i) for _, i, j in g)]
    order = np.argsort(freqs, kind="stable")
    return np.array(freqs)[order], tuple(pairs[k] for k in order)


def decompose(couplings, spectrum, freq_tol=None):
    """Split Hermitian couplings into eigenoperators of the spectrum's Hamiltonian.

    Parameters
    ----------
    couplings : array or sequence of arrays
        Hermitian system coupling operators ``A_alpha``.
    spectrum : Spectrum
        Eigen-decomposition of the system Hamiltonian.
    freq_tol : float, optional
        Bohr differences closer than this are merged.  Defaults to
        ``1e-8 * (max energy - min energy)``.
    """
    if isinstance(couplings, np.ndarray) and couplings.ndim == 2:
        couplings = [couplings]
    couplings = tuple(require_hermitian(a, name=f"coupling {k}") for k, a in enumerate(couplings))
    d = spectrum.dim
    for a in couplings:
        if a.shape != (d, d):
            raise ValueError(f"coupling shape {a.shape} does not match Hilbert dimension {d}")
    e = spectrum.energies
    if freq_tol is None:
        freq_tol = 1e-8 * (e[-1] - e[0]) if len(e) > 1 else 1e-12
        freq_tol = max(freq_tol, 1e-14)
    freqs, pairs = cluster_bohr_frequencies(e, freq_tol)

    B = spectrum.bases
    ops = {}
    for alpha, a in enumerate(couplings):
        drop = 1e-13 * max(1.0, _maxabs(a))
        for k, plist in enumerate(pairs):
            acc = np.zeros((d, d), dtype=complex)
            for i, j in plist:
                acc += B[i] @ (B[i].conj().T @ a @ B[j]) @ B[j].conj().T
            if _maxabs(acc) >= drop:
                ops[(alpha, k)] = acc
    used = sorted({k for _, k in ops})
    remap = {k: n for n, k in enumerate(used)}
    return BohrDecomposition(
        spectrum=spectrum,
        couplings=couplings,
        frequencies=freqs[used],
        pairs=tuple(pairs[k] for k in used),
        ops={(a, remap[k]): m for (a, k), m in ops.items()},
        freq_tol=float(freq_tol),
    )


@dataclass(frozen=True)
class AlgebraReport:
    """Largest violations of the eigenoperator identities (max-abs entry norms)."""

    construction: float
    commutator: float
    adjoint: float
    completeness: float

    def worst(self):
        return max(self.construction, self.commutator, self.adjoint, self.completeness)


def verify_algebra(d):
    """Measure how well ``d`` satisfies the eigenoperator algebra.

    ``commutator`` is relative to the size of each coupling; the others are
    absolute.
    """
    sp = d.spectrum
    proj = sp.projectors
    h = sum(en * p for en, p in zip(sp.energies, proj))
    construction = commutator = adjoint = completeness = 0.0
    for alpha, a in enumerate(d.couplings):
        scale = max(_maxabs(a), 1e-300)
        total = np.zeros_like(a)
        for k, w in enumerate(d.frequencies):
            op = d.ops.get((alpha, k), np.zeros_like(a))
            total = total + op
            ref = sum((proj[i] @ a @ proj[j] for i, j in d.pairs[k]), np.zeros_like(a))
            construction = max(construction, _maxabs(op - ref))
            commutator = max(commutator, _maxabs(h @ op - op @ h + w * op) / scale)
            mk = d.index(-w)
            other = d.ops.get((alpha, mk), np.zeros_like(a)) if mk is not None else np.zeros_like(a)
            adjoint = max(adjoint, _maxabs(op.conj().T - other))
        completeness = max(completeness, _maxabs(total - a))
    return AlgebraReport(construction, commutator, adjoint, completeness)
