"""Spectral tensors and the non-diagonal Markovian generator.

The generator acting on a density matrix is

    L(rho) = -i[H_S + H_LS, rho]
             + sum_w sum_ab gamma_ab(w) (A_b(w) rho A_a(w)^+ - 1/2 {A_a(w)^+ A_b(w), rho})

with ``H_LS = sum_w sum_ab S_ab(w) A_a(w)^+ A_b(w)``.  It is kept in its
non-diagonal (gamma-matrix) form; :func:`diagonalize_gamma` is only a helper
for building jump channels.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .operators import commutator_superop, hermiticity_error, spost, spre, sprepost

__all__ = [
    "SpectralTensor",
    "TaggedLiouvillian",
    "gamma_from_halfline",
    "restrict_zero_temperature",
    "check_detailed_balance",
    "build_lamb_shift",
    "build_liouvillian",
    "diagonalize_gamma",
    "diagonal_form_liouvillian",
    "apply_generator",
    "energy_pair_violation",
    "energy_pair_order",
]

HERM_TOL = 1e-12
PSD_TOL = 1e-10


def _as_matrix(x, n=None):
    m = np.atleast_2d(np.asarray(x, dtype=complex))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"channel matrix must be square, got shape {m.shape}")
    if n is not None and m.shape[0] != n:
        raise ValueError(f"channel matrix has size {m.shape[0]}, expected {n}")
    return m


@dataclass(frozen=True)
class SpectralTensor:
    """Per-frequency rate matrices ``gamma(w)`` and shift matrices ``S(w)``.

    ``entries`` maps a Bohr frequency to ``(gamma, S)``, both Hermitian
    ``channel_count x channel_count`` matrices.  ``beta`` is the inverse bath
    temperature: ``math.inf`` for a zero-temperature tensor, ``None`` when
    unspecified.
    """

    entries: dict
    channel_count: int
    beta: float | None = None

    def __post_init__(self):
        clean = {}
        for w, (g, s) in self.entries.items():
            g = _as_matrix(g, self.channel_count)
            s = _as_matrix(s, self.channel_count)
            scale = max(1.0, float(np.max(np.abs(g))), float(np.max(np.abs(s))))
            if hermiticity_error(g) > HERM_TOL * scale:
                raise ValueError(f"gamma({w:g}) is not Hermitian")
            if hermiticity_error(s) > HERM_TOL * scale:
                raise ValueError(f"S({w:g}) is not Hermitian")
            lo = np.linalg.eigvalsh(0.5 * (g + g.conj().T))[0]
            if lo < -PSD_TOL:
                raise ValueError(f"gamma({w:g}) is not positive semidefinite (min eigenvalue {lo:.3e})")
            clean[float(w)] = (g, s)
        object.__setattr__(self, "entries", dict(sorted(clean.items())))
        if self.beta == math.inf:
            bad = [w for w, (g, _) in clean.items() if w < 0 and np.any(g != 0)]
            if bad:
                raise ValueError(
                    f"zero-temperature tensor carries absorption rates at negative frequencies {bad}; "
                    "at T=0 gamma(w<0) must vanish"
                )

    @classmethod
    def from_rates(cls, gamma, shifts=None, beta=None, channel_count=None):
        """Build from ``{w: gamma(w)}`` and optional ``{w: S(w)}`` maps.

        Scalars are accepted for single-channel tensors.
        """
        shifts = shifts or {}
        keys = set(gamma) | set(shifts)
        if channel_count is None:
            probe = next(iter(gamma.values()), next(iter(shifts.values()), 0.0))
            channel_count = _as_matrix(probe).shape[0]
        zero = np.zeros((channel_count, channel_count), dtype=complex)
        entries = {
            w: (_as_matrix(gamma.get(w, zero), channel_count), _as_matrix(shifts.get(w, zero), channel_count))
            for w in keys
        }
        return cls(entries=entries, channel_count=channel_count, beta=beta)

    @property
    def frequencies(self):
        return np.array(list(self.entries), dtype=float)

    def at(self, omega, tol=1e-9):
        """``(gamma, S)`` at the entry nearest ``omega`` within ``tol``, else ``None``."""
        for w, gs in self.entries.items():
            if abs(w - omega) <= tol:
                return gs
        return None

    def gamma(self, omega, tol=1e-9):
        hit = self.at(omega, tol)
        return np.zeros((self.channel_count,) * 2, dtype=complex) if hit is None else hit[0]

    @property
    def is_zero_temperature(self):
        return self.beta == math.inf and all(w >= 0 or not np.any(g) for w, (g, _) in self.entries.items())

    def max_rate(self):
        """Largest eigenvalue of any ``gamma(w)`` with ``w > 0``."""
        rates = [np.linalg.eigvalsh(g)[-1] for w, (g, _) in self.entries.items() if w > 0]
        return float(max(rates, default=0.0))


def gamma_from_halfline(Gamma, beta=None):
    """Rates and shifts from one-sided Fourier transforms of bath correlations.

    ``gamma = Gamma + Gamma^+`` and ``S = (Gamma - Gamma^+) / 2i``, per frequency.
    """
    entries = {}
    n = None
    for w, G in Gamma.items():
        G = _as_matrix(G, n)
        n = G.shape[0]
        if not np.all(np.isfinite(G)):
            raise ValueError(f"Gamma({w:g}) has non-finite entries")
        Gd = G.conj().T
        entries[w] = (G + Gd, (G - Gd) / 2j)
    if n is None:
        raise ValueError("Gamma is empty")
    return SpectralTensor(entries=entries, channel_count=n, beta=beta)


def restrict_zero_temperature(t):
    """Drop absorption (``w < 0``) rates and mark the tensor as ``T = 0``."""
    entries = {}
    for w, (g, s) in t.entries.items():
        if w < 0:
            g = np.zeros_like(g)
            if not np.any(s):
                continue
        entries[w] = (g, s)
    return SpectralTensor(entries=entries, channel_count=t.channel_count, beta=math.inf)


def check_detailed_balance(t, beta):
    """Largest entrywise violation of ``gamma(w) = exp(beta w) gamma(-w)``, ``w > 0``.

    Emission at ``w > 0`` must exceed absorption at ``-w`` by the Boltzmann
    factor.  For ``beta = inf`` the relation reduces to ``gamma(w<0) = 0`` and
    the returned value is the largest absorption rate (zero for restricted
    tensors).
    """
    zero = np.zeros((t.channel_count,) * 2, dtype=complex)
    if beta == math.inf:
        return float(max((np.max(np.abs(g)) for w, (g, _) in t.entries.items() if w < 0), default=0.0))
    worst = 0.0
    for w in sorted({abs(w) for w in t.entries if w != 0}):
        em = t.at(w, 1e-12)
        ab = t.at(-w, 1e-12)
        g_em = zero if em is None else em[0]
        g_ab = zero if ab is None else ab[0]
        pred = np.zeros_like(g_ab) if not np.any(g_ab) else np.exp(beta * w) * g_ab
        worst = max(worst, float(np.max(np.abs(g_em - pred))))
    return worst


def _match_tol(d, omega):
    return max(d.freq_tol, 1e-9 * max(1.0, abs(omega)))


def _tensor_terms(t, d):
    """Yield ``(k, gamma, S)`` for every decomposition frequency the tensor covers."""
    if t.channel_count != d.n_channels:
        raise ValueError(f"tensor has {t.channel_count} channels, decomposition has {d.n_channels}")
    used = set()
    for k, w in enumerate(d.frequencies):
        tol = _match_tol(d, w)
        for wt, (g, s) in t.entries.items():
            if abs(wt - w) <= tol:
                used.add(wt)
                yield k, g, s
                break
    unused = [w for w in t.entries if w not in used and (np.any(t.entries[w][0]) or np.any(t.entries[w][1]))]
    if unused:
        warnings.warn(f"spectral tensor entries at {unused} match no Bohr frequency and are ignored", stacklevel=3)


def build_lamb_shift(t, d):
    """``H_LS = sum_w sum_ab S_ab(w) A_a(w)^+ A_b(w)``."""
    dim = d.dim
    h = np.zeros((dim, dim), dtype=complex)
    for k, _, s in _tensor_terms(t, d):
        if not np.any(s):
            continue
        ops = d.ops_at(k)
        for a, Aa in enumerate(ops):
            for b, Ab in enumerate(ops):
                if s[a, b] != 0:
                    h += s[a, b] * (Aa.conj().T @ Ab)
    return 0.5 * (h + h.conj().T)


@dataclass(frozen=True)
class TaggedLiouvillian:
    """Generator split into its Hamiltonian, Lamb-shift, jump and drift parts.

    ``jump`` is the sandwich term ``gamma_ab A_b rho A_a^+``; ``drift`` is the
    anticommutator term that damps populations and coherences.
    """

    hamiltonian: np.ndarray
    lamb_shift: np.ndarray
    jump: np.ndarray
    drift: np.ndarray
    H_LS: np.ndarray
    notes: tuple = field(default=())

    @property
    def total(self):
        return self.hamiltonian + self.lamb_shift + self.jump + self.drift

    @property
    def parts(self):
        return {"hamiltonian": self.hamiltonian, "lamb_shift": self.lamb_shift, "jump": self.jump, "drift": self.drift}

    @property
    def dim(self):
        return self.H_LS.shape[0]


def build_liouvillian(H_S, t, d, drop_lamb_shift=False):
    """Assemble the tagged superoperator of the master equation.

    Any tensor is accepted; only zero-temperature tensors are suitable for the
    sector cascade.  Dissipative entries at ``w = 0`` are kept and reported in
    ``notes``.
    """
    H_S = np.asarray(H_S, dtype=complex)
    dim = d.dim
    if H_S.shape != (dim, dim):
        raise ValueError(f"H_S shape {H_S.shape} does not match decomposition dimension {dim}")
    n2 = dim * dim
    jump = np.zeros((n2, n2), dtype=complex)
    drift = np.zeros((n2, n2), dtype=complex)
    notes = []
    for k, g, _ in _tensor_terms(t, d):
        if not np.any(g):
            continue
        w = d.frequencies[k]
        if abs(w) <= d.freq_tol:
            notes.append(f"dissipative entry at w=0 (pure dephasing channel), max rate {np.max(np.abs(g)):.3g}")
        ops = d.ops_at(k)
        for a, Aa in enumerate(ops):
            Aad = Aa.conj().T
            for b, Ab in enumerate(ops):
                c = g[a, b]
                if c == 0:
                    continue
                jump += c * sprepost(Ab, Aad)
                AdA = Aad @ Ab
                drift -= 0.5 * c * (spre(AdA) + spost(AdA))
    H_LS = np.zeros((dim, dim), dtype=complex) if drop_lamb_shift else build_lamb_shift(t, d)
    return TaggedLiouvillian(
        hamiltonian=commutator_superop(H_S),
        lamb_shift=commutator_superop(H_LS),
        jump=jump,
        drift=drift,
        H_LS=H_LS,
        notes=tuple(notes),
    )


def apply_generator(L, rho):
    """``L(rho)`` for a superoperator matrix ``L`` (column stacking)."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    return (L @ rho.reshape(-1, order="F")).reshape(d, d, order="F")


def diagonalize_gamma(g, tol=1e-12):
    """Rates and unitary with ``g = U diag(rates) U^+``.

    Rates above ``-tol`` are clipped to zero.  Eigenvectors are phase-fixed
    so their first component of largest magnitude is real positive, and
    degenerate rates are ordered lexicographically on the components, which
    makes the result reproducible.
    """
    g = 0.5 * (np.asarray(g) + np.asarray(g).conj().T)
    r, U = np.linalg.eigh(g)
    if r.size and r[0] < -tol * max(1.0, abs(r[-1])):
        raise ValueError(f"rate matrix has a negative eigenvalue {r[0]:.3e}")
    r = np.clip(r, 0.0, None)
    for k in range(U.shape[1]):
        col = U[:, k]
        p = int(np.argmax(np.abs(col) > np.abs(col).max() * (1 - 1e-9)))
        U[:, k] = col * (abs(col[p]) / col[p])
    scale = max(1.0, float(r.max(initial=0.0)))
    keys = [(-round(rk / scale, 10),) + tuple(np.round(np.c_[U[:, k].real, U[:, k].imag].ravel(), 10)) for k, rk in enumerate(r)]
    order = sorted(range(len(r)), key=lambda k: keys[k])
    return r[order], U[:, order]


def diagonal_form_liouvillian(H_S, t, d, drop_lamb_shift=False):
    """The same generator written with diagonalized channels ``L_k = sum_b conj(U_bk) A_b``."""
    dim = d.dim
    H_LS = np.zeros((dim, dim), dtype=complex) if drop_lamb_shift else build_lamb_shift(t, d)
    L = commutator_superop(np.asarray(H_S) + H_LS)
    for k, g, _ in _tensor_terms(t, d):
        if not np.any(g):
            continue
        rates, U = diagonalize_gamma(g)
        ops = d.ops_at(k)
        for j, r in enumerate(rates):
            if r == 0:
                continue
            Lk = sum(U[b, j].conj() * ops[b] for b in range(len(ops)))
            LdL = Lk.conj().T @ Lk
            L = L + r * (sprepost(Lk, Lk.conj().T) - 0.5 * (spre(LdL) + spost(LdL)))
    return L


def _pair_tables(spectrum):
    V = spectrum.eigenbasis
    lab = spectrum.labels()
    E = spectrum.energies
    d = V.shape[0]
    # column-stacked index k = i + d*j  <->  |v_i><v_j|
    m = np.tile(lab, d)
    n = np.repeat(lab, d)
    return V, E, m, n


def energy_pair_violation(L, spectrum, freq_tol=None):
    """Largest superoperator entry that breaks the zero-temperature selection rule.

    In the eigenbasis of the system Hamiltonian, the block ``(m, n)`` of
    matrix units may only feed itself, or a block ``(m', n')`` with
    ``e_m - e_m' = e_n - e_n' > 0`` (a single emission lowering both sides by
    the same Bohr frequency).
    """
    V, E, m, n = _pair_tables(spectrum)
    if freq_tol is None:
        freq_tol = max(1e-8 * (E[-1] - E[0]) if len(E) > 1 else 0.0, 1e-12)
    S = np.kron(V.conj(), V)
    Le = S.conj().T @ np.asarray(L) @ S
    drop_m = E[m][None, :] - E[m][:, None]  # source minus target
    drop_n = E[n][None, :] - E[n][:, None]
    same = (m[:, None] == m[None, :]) & (n[:, None] == n[None, :])
    lowered = (drop_m > freq_tol) & (np.abs(drop_m - drop_n) <= freq_tol)
    bad = ~(same | lowered)
    return float(np.max(np.abs(Le[bad]), initial=0.0))


def energy_pair_order(spectrum, freq_tol=None):
    """Permutation of the eigen-matrix-unit basis that makes a T=0 generator block lower triangular.

    Basis elements are grouped by Bohr difference ``e_m - e_n`` and, within a
    group, ordered by descending ``e_m``.  Returns ``(perm, block_id)`` where
    ``block_id`` labels the sector pair of each permuted element.
    """
    V, E, m, n = _pair_tables(spectrum)
    if freq_tol is None:
        freq_tol = max(1e-8 * (E[-1] - E[0]) if len(E) > 1 else 0.0, 1e-12)
    diff = E[m] - E[n]
    uniq = np.unique(diff)
    cluster = np.concatenate([[0], np.cumsum(np.diff(uniq) > freq_tol)])
    delta = cluster[np.searchsorted(uniq, diff)]
    perm = np.lexsort((n, m, -E[m], delta))
    block_id = (m * len(E) + n)[perm]
    return perm, block_id
