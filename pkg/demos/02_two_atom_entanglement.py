# %% [markdown]
# Entanglement left behind by collective decay
# ---------------------------------------------
# Two identical atoms share one zero-temperature reservoir.  With a
# collective rate gamma12 the single-excitation states decay at gamma +- gamma12.
# When the atoms sit at the same point (gamma12 = gamma) the antisymmetric
# state never decays, so part of any initial excitation stays trapped.

# %%
import numpy as np

from qcascade import assemble, concurrence, dfs_basis, model_two_atoms, solve_state
from qcascade.models import two_atom_state
from qcascade.trajectories import diagonalize_channels

system = assemble(model_two_atoms(omega0=1.0, gamma=1.0, gamma12=1.0, s12=0.2, initial="eg"))
channels = diagonalize_channels(system.tensor, system.decomposition)
print("collective decay rates:", channels.rates, "(the zero-rate channel is dropped)")

# %% [markdown]
# The decoherence-free subspace is what no jump operator can touch and the
# effective Hamiltonian keeps to itself: the ground state and the singlet.

# %%
Q = dfs_basis(system.decomposition, system.tensor, system.H0)
singlet = two_atom_state("singlet")
print("DFS dimension:", Q.shape[1])
print("weight of the singlet inside it:", np.linalg.norm(Q.conj().T @ singlet) ** 2)

# %% [markdown]
# |eg> is half singlet, half triplet.  The triplet half radiates away; the
# singlet half is stuck, which leaves an entangled mixture with concurrence 1/2.

# %%
times = np.linspace(0.0, 12.0, 7)
rho = solve_state(system.model.initial_state, system.generator(), system.tensor, system.decomposition, times).assemble()
for t, r in zip(times, rho):
    r = 0.5 * (r + r.conj().T)
    pop_s = np.real(singlet.conj() @ r @ singlet)
    print(f"t={t:5.1f}  singlet population {pop_s:.6f}  concurrence {concurrence(r):.6f}")

# %% [markdown]
# Move the atoms apart (gamma12 < gamma) and the trap disappears.

# %%
apart = assemble(model_two_atoms(1.0, 1.0, 0.9, 0.2, initial="eg"))
late = solve_state(apart.model.initial_state, apart.generator(), apart.tensor, apart.decomposition, [0.0, 200.0])
print("gamma12 = 0.9, concurrence at t = 200:", concurrence(0.5 * (late.assemble()[-1] + late.assemble()[-1].conj().T)))
