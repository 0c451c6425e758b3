# %% [markdown]
# Counting photons leaving a cavity
# ---------------------------------
# A single lossy mode starts in the Fock state |n>.  At zero temperature each
# emission lowers the energy by exactly one quantum, so the state splits into
# orthogonal sectors labelled by the number of photons already emitted.  The
# trace of each sector is the probability of having counted that many clicks.

# %%
import math

import numpy as np
from scipy.stats import binom

from qcascade import assemble, jump_count_distribution, model_damped_cavity, solve_state
from qcascade.trajectories import diagonalize_channels, jump_count_histogram, run_ensemble

n, kappa = 3, 1.0
system = assemble(model_damped_cavity(n_max=n, omega_c=1.0, kappa=kappa, initial=n))
times = np.linspace(0.0, 4.0, 9)

# %% [markdown]
# The sector cascade solves the top sector first (it only drifts and decays),
# then feeds each lower sector from the one above.

# %%
solution = solve_state(system.model.initial_state, system.generator(), system.tensor, system.decomposition, times)
P = jump_count_distribution(solution)
print("t      " + "  ".join(f"P_{k}" for k in range(n + 1)))
for t, row in zip(times, P):
    print(f"{t:4.1f}  " + "  ".join(f"{x:.4f}" for x in row))

# %% [markdown]
# Each photon leaves independently with probability 1 - exp(-kappa t), so the
# counts are binomial.

# %%
p = 1 - np.exp(-kappa * times)
binomial = np.array([binom.pmf(np.arange(n + 1), n, pk) for pk in p])
print("largest deviation from the binomial law:", np.max(np.abs(P - binomial)))

# %% [markdown]
# The same numbers come out of quantum-jump trajectories, one random record at
# a time.  At t = ln 2 / kappa half the photons are gone on average.

# %%
t_half = math.log(2) / kappa
channels = diagonalize_channels(system.tensor, system.decomposition)
records = run_ensemble(system.model.initial_state, system.generator(), channels, [0.0, t_half], 5000, seed=1)
hist, se = jump_count_histogram(records, t_half, max_k=n)
exact = binom.pmf(np.arange(n + 1), n, 0.5)
for k in range(n + 1):
    print(f"k={k}: trajectories {hist[k]:.4f} +- {se[k]:.4f}   exact {exact[k]:.4f}")
