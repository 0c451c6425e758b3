"""Reference propagation of the full master equation.

Two independent routes: exponentiating the superoperator, and adaptive
Runge-Kutta integration of the vectorized equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .operators import require_density_matrix, unvec, vec

__all__ = ["EvolutionResult", "IntegrationError", "propagate_expm", "propagate_adaptive", "state_diagnostics"]

TRACE_TOL = 1e-8
HERM_TOL = 1e-9
POS_TOL = 1e-8


class IntegrationError(RuntimeError):
    """Adaptive integration gave up; ``last_time`` is the last accepted time."""

    def __init__(self, message, last_time):
        super().__init__(f"{message} (last good time {last_time:.6g})")
        self.last_time = last_time


def state_diagnostics(states):
    """Trace deviation, Hermiticity deviation and minimum eigenvalue per state."""
    states = np.asarray(states)
    tr = np.abs(np.trace(states, axis1=-2, axis2=-1) - 1.0)
    herm = np.max(np.abs(states - np.conj(np.swapaxes(states, -1, -2))), axis=(-2, -1))
    sym = 0.5 * (states + np.conj(np.swapaxes(states, -1, -2)))
    lo = np.linalg.eigvalsh(sym)[..., 0]
    return {"trace": tr, "hermiticity": herm, "min_eigenvalue": lo}


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: np.ndarray
    diagnostics: dict
    notes: list = field(default_factory=list)

    @property
    def healthy(self):
        dg = self.diagnostics
        return bool(
            np.all(dg["trace"] <= TRACE_TOL)
            and np.all(dg["hermiticity"] <= HERM_TOL)
            and np.all(dg["min_eigenvalue"] >= -POS_TOL)
        )

    def worst(self):
        dg = self.diagnostics
        return {
            "trace": float(dg["trace"].max()),
            "hermiticity": float(dg["hermiticity"].max()),
            "min_eigenvalue": float(dg["min_eigenvalue"].min()),
        }


def _superop(L):
    return np.asarray(getattr(L, "total", L))


def _prepare(L, rho0, times):
    L = _superop(L)
    rho0 = require_density_matrix(rho0, tol=1e-10, name="initial state")
    d = rho0.shape[0]
    if L.shape != (d * d, d * d):
        raise ValueError(f"generator shape {L.shape} incompatible with state dimension {d}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0):
        raise ValueError("times must be a non-decreasing 1-D sequence")
    return L, rho0, times


def _expm_checked(M, notes):
    out = scipy.linalg.expm(M)
    if np.all(np.isfinite(out)):
        return out
    # squaring from a small step; each factor stays well inside the Pade range
    k = max(1, int(np.ceil(np.log2(max(np.linalg.norm(M, 1), 1.0)))) + 4)
    out = scipy.linalg.expm(M / 2**k)
    for _ in range(k):
        out = out @ out
    notes.append(f"expm fallback: repeated squaring with 2^{k} sub-steps")
    if not np.all(np.isfinite(out)):
        raise OverflowError("superoperator exponential overflowed")
    return out


def propagate_expm(L, rho0, times):
    """``rho(t) = unvec(exp(L t) vec(rho0))`` at each requested time."""
    L, rho0, times = _prepare(L, rho0, times)
    d = rho0.shape[0]
    v0 = vec(rho0)
    notes = []
    out = np.empty((len(times), d * d), dtype=complex)
    for i, t in enumerate(times):
        out[i] = _expm_checked(L * t, notes) @ v0
    states = unvec(out, d)
    return EvolutionResult(times, states, state_diagnostics(states), notes)


def propagate_adaptive(L, rho0, times, rtol=1e-10, atol=1e-12, method="DOP853"):
    """Integrate ``d vec(rho)/dt = L vec(rho)`` with an adaptive Runge-Kutta scheme."""
    L, rho0, times = _prepare(L, rho0, times)
    d = rho0.shape[0]
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    v0 = vec(rho0)
    if len(times) == 0:
        return EvolutionResult(times, np.empty((0, d, d), complex), state_diagnostics(np.empty((0, d, d))))
    t0 = 0.0 if times[0] >= 0 else times[0]
    if times[-1] == t0:
        states = np.repeat(rho0[None], len(times), axis=0)
        return EvolutionResult(times, states, state_diagnostics(states))
    if method in ("Radau", "LSODA"):
        # these solvers are real-only: integrate (Re v, Im v) instead
        M = np.block([[L.real, -L.imag], [L.imag, L.real]])
        sol = solve_ivp(lambda t, y: M @ y, (t0, times[-1]), np.r_[v0.real, v0.imag], method=method,
                        t_eval=times, rtol=rtol, atol=atol, jac=M)
        if sol.status == 0:
            sol.y = sol.y[: d * d] + 1j * sol.y[d * d:]
    else:
        extra = {"jac": L} if method == "BDF" else {}
        sol = solve_ivp(lambda t, y: L @ y, (t0, times[-1]), v0, method=method, t_eval=times, rtol=rtol,
                        atol=atol, **extra)
    if sol.status != 0:
        raise IntegrationError(sol.message, float(sol.t[-1]) if len(sol.t) else t0)
    states = unvec(sol.y.T, d)
    return EvolutionResult(times, states, state_diagnostics(states))
