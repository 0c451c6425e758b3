"""Zero-temperature evolution as a cascade of free-energy sectors.

At ``T = 0`` the density matrix splits into blocks ``rho_mn = P_m rho P_n``
between eigenspaces of ``H_S``.  Each block drifts under the non-Hermitian
generator ``B = H0 - (i/2) H'`` and is fed only by blocks one emission
higher, so the whole evolution can be solved sector by sector from the top
down.  Diagonal blocks are the generalized trajectories; their traces are the
probabilities of the corresponding emission counts.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .operators import require_density_matrix

__all__ = [
    "EffectiveGenerator",
    "SectorSolution",
    "CascadeError",
    "effective_generator",
    "sector_split",
    "cascade_solve",
    "closed_form_block",
    "jump_count_distribution",
    "solve_state",
]


class CascadeError(RuntimeError):
    """Raised when the sector feeding graph is not strictly descending."""


@dataclass(frozen=True)
class EffectiveGenerator:
    """``B = H0 - (i/2) H'`` with Hermitian ``H0`` and positive ``H'``."""

    H0: np.ndarray
    Hprime: np.ndarray

    @property
    def B(self):
        return self.H0 - 0.5j * self.Hprime

    @cached_property
    def _eig(self):
        w, W = np.linalg.eig(self.B)
        if np.linalg.cond(W) > 1e8:
            return None
        return w, W, np.linalg.inv(W)

    def propagator(self, tau):
        """``exp(-i B tau)``; ``tau`` may be an array, giving a stack of matrices."""
        tau = np.asarray(tau, dtype=float)
        eig = self._eig
        if eig is None:
            flat = [scipy.linalg.expm(-1j * self.B * s) for s in tau.ravel()]
            return np.array(flat).reshape(tau.shape + self.B.shape)
        w, W, Wi = eig
        phase = np.exp(-1j * np.multiply.outer(tau, w))
        return (W * phase[..., None, :]) @ Wi


def _dissipative_terms(t, d, positive_only):
    """``(k, gamma)`` for frequencies with nonzero rates (``w > 0`` or ``w >= 0``)."""
    from .liouvillian import _tensor_terms

    out = []
    for k, g, _ in _tensor_terms(t, d):
        w = d.frequencies[k]
        if not np.any(g):
            continue
        if w > d.freq_tol or (not positive_only and abs(w) <= d.freq_tol):
            out.append((k, g))
    return out


def effective_generator(H0, t, d):
    """Build ``B`` from a zero-temperature tensor.

    ``H' = sum_w sum_ab gamma_ab(w) A_a(w)^+ A_b(w)``, summed over the emission
    frequencies together with any ``w = 0`` dephasing entries.
    """
    if not t.is_zero_temperature:
        raise ValueError(
            "the sector cascade needs a zero-temperature tensor (beta = inf, no absorption at w < 0); "
            "use restrict_zero_temperature first"
        )
    H0 = np.asarray(H0, dtype=complex)
    dim = d.dim
    hp = np.zeros((dim, dim), dtype=complex)
    for k, g in _dissipative_terms(t, d, positive_only=False):
        ops = d.ops_at(k)
        for a, Aa in enumerate(ops):
            for b, Ab in enumerate(ops):
                if g[a, b] != 0:
                    hp += g[a, b] * (Aa.conj().T @ Ab)
    hp = 0.5 * (hp + hp.conj().T)
    return EffectiveGenerator(H0=0.5 * (H0 + H0.conj().T), Hprime=hp)


def sector_split(rho0, spectrum, drop=1e-13):
    """``{(m, n): P_m rho0 P_n}`` for every non-negligible block."""
    rho0 = np.asarray(rho0, dtype=complex)
    P = spectrum.projectors
    blocks = {}
    for m, Pm in enumerate(P):
        for n, Pn in enumerate(P):
            blk = Pm @ rho0 @ Pn
            if np.max(np.abs(blk)) >= drop:
                blocks[(m, n)] = blk
    return blocks


@dataclass
class SectorSolution:
    """Blocks ``rho_mn(t)`` on a time grid.

    ``blocks[(m, n)]`` has shape ``(len(times), d, d)``; sector indices count
    upward from the ground energy.  Blocks that are never populated are absent.
    """

    times: np.ndarray
    energies: np.ndarray
    blocks: dict
    initial_sectors: frozenset

    @property
    def sector_energies(self):
        """Energies from the top sector down."""
        return self.energies[::-1]

    @property
    def dim(self):
        return next(iter(self.blocks.values())).shape[-1]

    def block(self, m, n=None):
        n = m if n is None else n
        if (m, n) in self.blocks:
            return self.blocks[(m, n)]
        return np.zeros((len(self.times), self.dim, self.dim), dtype=complex)

    def assemble(self):
        """``sum_mn rho_mn(t)``, the full density matrix on the grid."""
        return sum(self.blocks.values())

    def diagonal_weights(self):
        """``tr rho_mm(t)`` for every sector, shape ``(len(times), n_sectors)``."""
        out = np.zeros((len(self.times), len(self.energies)))
        for (m, n), blk in self.blocks.items():
            if m == n:
                out[:, m] = np.trace(blk, axis1=1, axis2=2).real
        return out


def _block_superop(Bm, Bn):
    """Matrix of ``X -> -i (Bm X - X Bn^+)`` on column-stacked ``X``."""
    return -1j * (np.kron(np.eye(Bn.shape[0]), Bm) - np.kron(Bn.conj(), np.eye(Bm.shape[0])))


def cascade_solve(blocks, gen, t, d, times, rtol=1e-12, atol=1e-14):
    """Evolve sector blocks from the highest energy down.

    Each block obeys

        d rho_mn/dt = -i (B rho_mn - rho_mn B^+) + sum gamma_ab(w) A_b(w) rho_m'n' A_a(w)^+

    where ``(m', n')`` ranges over the blocks lying one emission ``w > 0``
    above on both sides.  Sectors without feeding evolve as
    ``U(t) rho U(t)^+`` with ``U = exp(-iBt)``; the others are integrated with
    an adaptive Runge-Kutta scheme, one sector level at a time, using the
    dense output of the levels above.
    """
    sp = d.spectrum
    V = sp.bases
    nsec = len(sp)
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    B = gen.B
    scale = max(1.0, float(np.max(np.abs(B))))
    for m in range(nsec):
        for n in range(nsec):
            if m != n and np.max(np.abs(V[m].conj().T @ B @ V[n])) > 1e-9 * scale:
                raise CascadeError("effective generator couples different energy sectors; H0 must commute with H_S")
    Bs = [V[m].conj().T @ B @ V[m] for m in range(nsec)]

    # feeding superoperators in sector coordinates, keyed target -> {source: matrix}
    feeds = defaultdict(dict)
    inblock = defaultdict(lambda: 0)
    for k, g in _dissipative_terms(t, d, positive_only=False):
        ops = d.ops_at(k)
        w = d.frequencies[k]
        plist = d.pairs[k]
        for (m, ms) in plist:
            for (n, ns) in plist:
                if abs(w) <= d.freq_tol and (ms != m or ns != n):
                    continue
                T = 0
                for a, Aa in enumerate(ops):
                    Aan = V[n].conj().T @ Aa @ V[ns]
                    for b, Ab in enumerate(ops):
                        if g[a, b] != 0:
                            T = T + g[a, b] * np.kron(Aan.conj(), V[m].conj().T @ Ab @ V[ms])
                if np.isscalar(T):
                    continue
                if abs(w) <= d.freq_tol:
                    inblock[(m, n)] = inblock[(m, n)] + T
                else:
                    if sp.energies[ms] <= sp.energies[m]:
                        raise CascadeError(f"sector {ms} feeds {m} without losing energy")
                    feeds[(m, n)][(ms, ns)] = feeds[(m, n)].get((ms, ns), 0) + T

    init = {
        key: V[key[0]].conj().T @ blk @ V[key[1]]
        for key, blk in blocks.items()
        if np.max(np.abs(blk)) > 0
    }
    # every block reachable from the initial ones, following feeding edges downward
    children = defaultdict(set)
    for tgt, srcs in feeds.items():
        for src in srcs:
            children[src].add(tgt)
    live = set(init)
    stack = list(init)
    while stack:
        for c in children[stack.pop()]:
            if c not in live:
                live.add(c)
                stack.append(c)

    t_end = float(times[-1]) if len(times) else 0.0
    level_eval = {}   # m -> callable(t) -> stacked vector of that level
    level_layout = {}  # m -> {(m, n): slice}
    out_blocks = {}
    for m in range(nsec - 1, -1, -1):
        keys = sorted(key for key in live if key[0] == m)
        if not keys:
            continue
        layout, pos = {}, 0
        for key in keys:
            size = V[key[0]].shape[1] * V[key[1]].shape[1]
            layout[key] = slice(pos, pos + size)
            pos += size
        K = np.zeros((pos, pos), dtype=complex)
        y0 = np.zeros(pos, dtype=complex)
        for key, sl in layout.items():
            K[sl, sl] = _block_superop(Bs[key[0]], Bs[key[1]]) + inblock[key]
            if key in init:
                y0[sl] = init[key].reshape(-1, order="F")
        # forcing matrices per source level
        forcing = {}
        for key, sl in layout.items():
            for src, T in feeds[key].items():
                if src not in live:
                    continue
                lvl = src[0]
                if lvl not in forcing:
                    forcing[lvl] = np.zeros((pos, level_eval[lvl](0.0).shape[0]), dtype=complex)
                forcing[lvl][sl, level_layout[lvl][src]] += T
        level_layout[m] = layout

        if not forcing:
            eig = _small_exp(K)
            level_eval[m] = (lambda tt, eig=eig, y0=y0: eig(tt) @ y0)
            values = np.array([level_eval[m](tt) for tt in times]) if len(times) else np.zeros((0, pos))
        else:
            srcs = [(level_eval[lvl], F) for lvl, F in forcing.items()]

            def rhs(tt, y, K=K, srcs=srcs):
                dy = K @ y
                for ev, F in srcs:
                    dy = dy + F @ ev(tt)
                return dy

            if t_end == 0.0:
                values = np.repeat(y0[None], len(times), axis=0)
                level_eval[m] = (lambda tt, y0=y0: y0)
            else:
                sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True)
                if sol.status != 0:
                    raise CascadeError(f"integration of sector {m} failed: {sol.message}")
                dense = sol.sol
                level_eval[m] = (lambda tt, dense=dense: dense(tt))
                values = dense(times).T if len(times) else np.zeros((0, pos))
        for key, sl in layout.items():
            bm, bn = V[key[0]].shape[1], V[key[1]].shape[1]
            X = values[:, sl].reshape(len(times), bn, bm).transpose(0, 2, 1)
            out_blocks[key] = V[key[0]] @ X @ V[key[1]].conj().T
    return SectorSolution(
        times=times,
        energies=sp.energies.copy(),
        blocks=out_blocks,
        initial_sectors=frozenset(init),
    )


def _small_exp(K):
    """Callable ``t -> exp(K t)`` using an eigen-decomposition when well conditioned."""
    if K.shape[0] and np.count_nonzero(K - np.diag(np.diag(K))) == 0:
        k = np.diag(K)
        return lambda t: np.diag(np.exp(k * t))
    w, W = np.linalg.eig(K)
    if np.linalg.cond(W) < 1e8:
        Wi = np.linalg.inv(W)
        return lambda t: (W * np.exp(w * t)) @ Wi
    return lambda t: scipy.linalg.expm(K * t)


def jump_count_distribution(s):
    """Probability ``P_k(t)`` of ``k`` emissions: the trace of the block ``k`` sectors down.

    Only defined when the initial state lies in a single diagonal sector.
    Returns an array of shape ``(len(times), N + 1)`` where ``N`` is the index
    of the initial sector.
    """
    init = set(s.initial_sectors)
    if len(init) != 1 or next(iter(init))[0] != next(iter(init))[1]:
        raise ValueError(
            "jump counts need an initial state inside one energy eigenspace; "
            "split the state with sector_split and solve each part separately"
        )
    top = next(iter(init))[0]
    w = s.diagonal_weights()
    return w[:, top::-1].copy()


def closed_form_block(rho0, gen, t, d, j, time, quad_order=64, max_jumps=3):
    """The ``j``-emission part of ``rho(time)`` from nested time integrals.

    With ``rho^(0)(s) = U(s) rho0 U(s)^+`` and ``U(s) = exp(-iBs)``,

        rho^(j)(t) = int_0^t U(t - s) J[rho^(j-1)(s)] U(t - s)^+ ds,

    where ``J`` is the emission sandwich summed over ``w > 0``.  The simplex
    ``0 <= s_j <= ... <= s_1 <= t`` is covered by nested Gauss-Legendre rules,
    so the cost grows as ``quad_order ** j``.  For a state starting in the top
    sector of an equally spaced ladder this is the block ``j`` sectors down.
    """
    if j < 0:
        raise ValueError("jump count must be non-negative")
    if j > max_jumps:
        raise ValueError(
            f"j={j} needs about {quad_order ** j:.3g} propagator evaluations; "
            f"limit is j <= {max_jumps} (use cascade_solve instead)"
        )
    rho0 = np.asarray(rho0, dtype=complex)
    terms = []
    for k, g in _dissipative_terms(t, d, positive_only=True):
        ops = d.ops_at(k)
        for a, Aa in enumerate(ops):
            for b, Ab in enumerate(ops):
                if g[a, b] != 0:
                    terms.append((g[a, b], Ab, Aa.conj().T))

    def jump(X):
        out = np.zeros_like(X)
        for c, left, right in terms:
            out = out + c * (left @ X @ right)
        return out

    x, wq = np.polynomial.legendre.leggauss(quad_order)

    def layer(level, s):
        s = np.asarray(s, dtype=float)
        if level == 0:
            U = gen.propagator(s)
            return U @ rho0 @ np.conj(np.swapaxes(U, -1, -2))
        out = np.empty(s.shape + rho0.shape, dtype=complex)
        for i, si in enumerate(s):
            nodes = 0.5 * si * (x + 1.0)
            weights = 0.5 * si * wq
            inner = jump(layer(level - 1, nodes))
            U = gen.propagator(si - nodes)
            out[i] = np.einsum("k,kij->ij", weights, U @ inner @ np.conj(np.swapaxes(U, -1, -2)))
        return out

    return layer(j, np.array([float(time)]))[0]


def solve_state(rho0, gen, t, d, times, **kw):
    """Split ``rho0`` into sectors and run the cascade."""
    rho0 = require_density_matrix(rho0, tol=1e-10, name="initial state")
    return cascade_solve(sector_split(rho0, d.spectrum), gen, t, d, times, **kw)
