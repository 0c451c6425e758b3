# %% [markdown]
# Three ways to the same density matrix
# -------------------------------------
# For a random zero-temperature model we propagate the master equation by
# exponentiating the superoperator, by adaptive Runge-Kutta integration, by
# the sector cascade, and by averaging quantum-jump trajectories.

# %%
import math

import numpy as np

from qcascade import SpectralTensor, assemble, decompose, hermitian_eigensystem, solve_state
from qcascade.models import ModelSpec
from qcascade.oracle import propagate_adaptive, propagate_expm
from qcascade.trajectories import diagonalize_channels, ensemble_average, run_ensemble

rng = np.random.default_rng(7)
dim = 5


def hermitian(n, scale=1.0):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (x + x.conj().T) / 2


H = np.diag(np.sort(rng.uniform(0, 3, dim))).astype(complex)
couplings = [hermitian(dim, 0.5), hermitian(dim, 0.5)]

# %% [markdown]
# Rates live on the emission (positive) Bohr frequencies only: that is what
# zero temperature means here.  Each rate matrix is a random positive one, so
# the two channels are correlated.

# %%
d = decompose(couplings, hermitian_eigensystem(H))
rates = {}
for w in d.frequencies:
    if w > d.freq_tol:
        x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rates[float(w)] = 0.2 * x @ x.conj().T
tensor = SpectralTensor.from_rates(rates, beta=math.inf, channel_count=2)
psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
psi /= np.linalg.norm(psi)
model = ModelSpec([dim], H, [("A", couplings[0]), ("B", couplings[1])], tensor, np.outer(psi, psi.conj()))
system = assemble(model)
times = np.linspace(0.0, 5.0 / system.gamma_max(), 11)

# %%
exact = propagate_expm(system.liouvillian, model.initial_state, times)
adaptive = propagate_adaptive(system.liouvillian, model.initial_state, times)
cascade = solve_state(model.initial_state, system.generator(), tensor, system.decomposition, times)
channels = diagonalize_channels(tensor, system.decomposition)
mc_mean, mc_se = ensemble_average(run_ensemble(model.initial_state, system.generator(), channels, times, 2000, seed=0))

print("adaptive - expm :", np.max(np.abs(adaptive.states - exact.states)))
print("cascade  - expm :", np.max(np.abs(cascade.assemble() - exact.states)))
print("jumps    - expm :", np.max(np.abs(mc_mean - exact.states)), " (largest standard error", np.max(mc_se), ")")
print("state health    :", exact.worst())
