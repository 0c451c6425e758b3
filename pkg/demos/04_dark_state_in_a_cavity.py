# %% [markdown]
# A dark state of two atoms in a lossy cavity
# -------------------------------------------
# Two atoms couple to one cavity mode with strengths g1 and g2.  The
# combination g2|eg0> - g1|ge0> does not talk to the cavity at all, so with no
# atomic decay of its own it keeps its excitation forever.

# %%
import numpy as np

from qcascade import assemble, dfs_basis, model_n_atoms_cavity, solve_state
from qcascade.models import populations, tensor_product_state

g = [0.1, 0.25]
dims = [2, 2, 3]
dark = g[1] * tensor_product_state([1, 0, 0], dims) - g[0] * tensor_product_state([0, 1, 0], dims)
dark /= np.linalg.norm(dark)
bright_atom = tensor_product_state([1, 0, 0], dims)

# %%
system = assemble(model_n_atoms_cavity(2, g, omega=1.0, kappa=0.5, gamma_at=0.0, n_max=2, initial=bright_atom))
Q = dfs_basis(system.decomposition, system.tensor, system.H0)
print("DFS dimension:", Q.shape[1], "  dark state inside:", np.isclose(np.linalg.norm(Q.conj().T @ dark), 1.0))

# %% [markdown]
# Starting with only atom 1 excited, the trapped fraction is the overlap with
# the dark state, g2^2 / (g1^2 + g2^2).

# %%
times = np.linspace(0.0, 400.0, 5)
rho = solve_state(system.model.initial_state, system.generator(), system.tensor, system.decomposition, times).assemble()
excited = [np.real(np.trace(r)) - populations(r)[0] for r in rho]
for t, e in zip(times, excited):
    print(f"t={t:6.1f}  probability of remaining excitation {e:.6f}")
print("predicted trapped fraction:", g[1] ** 2 / (g[0] ** 2 + g[1] ** 2))
