"""Quantum-jump unraveling of the zero-temperature master equation.

Between jumps a pure state follows ``psi(t) = exp(-iBt) psi`` and loses norm;
a jump happens when the squared norm falls to a uniform random level, through
channel ``k`` with probability proportional to ``r_k |L_k psi|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .cascade import _dissipative_terms
from .liouvillian import diagonalize_gamma

__all__ = [
    "JumpChannelSet",
    "TrajectoryRecord",
    "diagonalize_channels",
    "run_trajectory",
    "run_ensemble",
    "ensemble_average",
    "jump_count_histogram",
    "trajectory_rng",
]


@dataclass(frozen=True)
class JumpChannelSet:
    """Diagonalized jump channels: ``rates[i]`` and ``ops[i]`` emit at ``omegas[i]``."""

    omegas: np.ndarray
    rates: np.ndarray
    ops: tuple
    index: tuple  # (frequency index in the decomposition, eigen-channel k)

    def __len__(self):
        return len(self.rates)

    def apply(self, rho):
        """``sum_k r_k L_k rho L_k^+``."""
        out = np.zeros_like(rho, dtype=complex)
        for r, L in zip(self.rates, self.ops):
            out += r * (L @ rho @ L.conj().T)
        return out


def diagonalize_channels(t, d):
    """Diagonalize each ``gamma(w)`` into independent channels ``L_k = sum_b conj(U_bk) A_b(w)``.

    Zero-rate channels are dropped.
    """
    if not t.is_zero_temperature:
        raise ValueError("jump channels are built from a zero-temperature tensor")
    omegas, rates, ops, index = [], [], [], []
    for k, g in _dissipative_terms(t, d, positive_only=False):
        r, U = diagonalize_gamma(g)
        A = d.ops_at(k)
        for j, rj in enumerate(r):
            if rj <= 0:
                continue
            L = sum(U[b, j].conj() * A[b] for b in range(len(A)))
            omegas.append(float(d.frequencies[k]))
            rates.append(float(rj))
            ops.append(L)
            index.append((k, j))
    return JumpChannelSet(np.array(omegas), np.array(rates), tuple(ops), tuple(index))


@dataclass
class TrajectoryRecord:
    """One realization: jump events and normalized states on the output grid."""

    seed: tuple
    jump_times: np.ndarray
    jump_omegas: np.ndarray
    jump_channels: np.ndarray
    times: np.ndarray
    states: np.ndarray

    def jumps_before(self, t):
        return int(np.searchsorted(self.jump_times, t, side="right"))


def trajectory_rng(master_seed, index):
    """Independent generator for trajectory ``index`` of a run seeded by ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


class _Drift:
    """``exp(-iB tau) psi`` and its squared norm, for one starting vector."""

    def __init__(self, gen, psi):
        self.gen = gen
        eig = gen._eig
        if eig is None:
            self.c = None
            self.psi = psi
        else:
            w, W, Wi = eig
            self.w, self.W = w, W
            self.c = Wi @ psi

    def states(self, taus):
        taus = np.asarray(taus, dtype=float)
        if self.c is None:
            return np.einsum("tij,j->ti", self.gen.propagator(taus), self.psi)
        return (np.exp(-1j * np.multiply.outer(taus, self.w)) * self.c) @ self.W.T

    def norm2(self, tau):
        v = self.states(np.array([tau]))[0]
        return float(np.vdot(v, v).real)


def run_trajectory(psi0, gen, channels, t_max, times, rng, seed=None):
    """Simulate one jump trajectory up to ``t_max``.

    The jump time solves ``|exp(-iB tau) psi|^2 = u`` for a uniform ``u`` by
    bracketed root finding (the norm is non-increasing), to an absolute time
    tolerance of ``1e-10 t_max``.  Output states are normalized; a jump at
    exactly an output time is included in that output.
    """
    psi = np.asarray(psi0, dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-10:
        raise ValueError(f"initial state must be normalized (norm {nrm})")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(times > t_max * (1 + 1e-12)) or np.any(np.diff(times) < 0):
        raise ValueError("output times must be sorted within [0, t_max]")
    xtol = 1e-10 * t_max
    out = np.empty((len(times), len(psi)), dtype=complex)
    jt, jw, jk = [], [], []
    t_now = 0.0
    nxt = 0  # next output index to fill
    while True:
        drift = _Drift(gen, psi)
        u = rng.random()
        horizon = t_max - t_now
        if len(channels) == 0 or drift.norm2(horizon) > u:
            t_jump = np.inf
        else:
            tau = brentq(lambda s: drift.norm2(s) - u, 0.0, horizon, xtol=xtol, rtol=4 * np.finfo(float).eps)
            t_jump = t_now + tau
        stop = np.searchsorted(times, t_jump, side="left") if np.isfinite(t_jump) else len(times)
        if stop > nxt:
            seg = drift.states(times[nxt:stop] - t_now)
            out[nxt:stop] = seg / np.linalg.norm(seg, axis=1, keepdims=True)
            nxt = stop
        if not np.isfinite(t_jump):
            break
        phi = drift.states(np.array([t_jump - t_now]))[0]
        weights = np.array([r * np.vdot(L @ phi, L @ phi).real for r, L in zip(channels.rates, channels.ops)])
        total = weights.sum()
        if total <= 0:
            break
        k = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
        k = min(k, len(weights) - 1)
        psi = channels.ops[k] @ phi
        psi = psi / np.linalg.norm(psi)
        jt.append(t_jump)
        jw.append(channels.omegas[k])
        jk.append(k)
        t_now = t_jump
    return TrajectoryRecord(
        seed=seed,
        jump_times=np.array(jt),
        jump_omegas=np.array(jw),
        jump_channels=np.array(jk, dtype=int),
        times=times,
        states=out,
    )


def run_ensemble(rho0, gen, channels, times, n_traj, seed=0, t_max=None):
    """Run ``n_traj`` trajectories; mixed initial states are sampled from their eigen-decomposition.

    Trajectory ``i`` draws from :func:`trajectory_rng` ``(seed, i)``, so results
    do not depend on how the work is scheduled.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    times = np.asarray(times, dtype=float)
    t_max = float(times[-1]) if t_max is None else t_max
    if rho0.ndim == 1:
        pure = [(1.0, rho0)]
    else:
        p, v = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
        pure = [(pk, v[:, k]) for k, pk in enumerate(p) if pk > 1e-14]
    probs = np.array([pk for pk, _ in pure])
    cum = np.cumsum(probs / probs.sum())
    records = []
    for i in range(n_traj):
        rng = trajectory_rng(seed, i)
        j = 0 if len(pure) == 1 else min(int(np.searchsorted(cum, rng.random(), side="right")), len(pure) - 1)
        records.append(run_trajectory(pure[j][1], gen, channels, t_max, times, rng, seed=(seed, i)))
    return records


def ensemble_average(records, times=None):
    """Mean of ``|psi><psi|`` over records with per-entry standard errors.

    The standard error of an entry combines the sample variances of its real
    and imaginary parts.
    """
    if len(records) < 2:
        raise ValueError("need at least two trajectories")
    grid = records[0].times if times is None else np.asarray(times)
    for r in records:
        if r.times.shape != grid.shape or not np.allclose(r.times, grid, rtol=0, atol=0):
            raise ValueError("trajectories were recorded on different time grids")
    M = len(records)
    d = records[0].states.shape[1]
    mean = np.zeros((len(grid), d, d), dtype=complex)
    sq = np.zeros((len(grid), d, d))
    for r in records:  # fixed summation order: by trajectory index
        proj = r.states[:, :, None] * r.states[:, None, :].conj()
        mean += proj
        sq += proj.real**2 + proj.imag**2
    mean /= M
    var = (sq / M - (mean.real**2 + mean.imag**2)) * M / (M - 1)
    stderr = np.sqrt(np.clip(var, 0.0, None) / M)
    return mean, stderr


def jump_count_histogram(records, t, max_k=None):
    """Empirical probabilities of ``k`` jumps up to time ``t`` and their binomial standard errors."""
    counts = np.array([r.jumps_before(t) for r in records])
    max_k = counts.max() if max_k is None else max_k
    p = np.bincount(counts, minlength=max_k + 1)[: max_k + 1] / len(records)
    se = np.sqrt(p * (1 - p) / len(records))
    return p, se
