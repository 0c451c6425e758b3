"""Zero-temperature Markovian open quantum systems solved as a cascade of energy sectors."""

from .cascade import (
    EffectiveGenerator,
    SectorSolution,
    cascade_solve,
    closed_form_block,
    effective_generator,
    jump_count_distribution,
    sector_split,
    solve_state,
)
from .eigenops import BohrDecomposition, decompose, verify_algebra
from .liouvillian import (
    SpectralTensor,
    TaggedLiouvillian,
    build_lamb_shift,
    build_liouvillian,
    check_detailed_balance,
    energy_pair_violation,
    gamma_from_halfline,
    restrict_zero_temperature,
)
from .models import (
    ModelSpec,
    assemble,
    concurrence,
    dfs_basis,
    model_damped_cavity,
    model_damped_qubit,
    model_jaynes_cummings,
    model_n_atoms_cavity,
    model_two_atoms,
)
from .oracle import EvolutionResult, propagate_adaptive, propagate_expm
from .operators import Spectrum, hermitian_eigensystem, matrix_exponential, partial_trace
from .trajectories import diagonalize_channels, ensemble_average, run_ensemble, run_trajectory

__version__ = "0.1.0"
