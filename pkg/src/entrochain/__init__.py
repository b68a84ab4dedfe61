"""Entanglement and observational entropy of spinless fermions on an open
1-D lattice: exact diagonalization, random pure thermal states, entropy
fluctuation statistics, and derivative-free extremization over eigenphases.
"""

from .lattice import (
    FockBasis,
    LatticeError,
    LatticeParams,
    RegionPartition,
    build_hamiltonian,
    enumerate_basis,
    macrostate_volume,
    params_from_file,
    particle_density,
    region_occupations,
)
from .spectral import (
    SpectralError,
    Spectrum,
    canonical_entropy,
    diagonalize,
    get_spectrum,
    load_spectrum,
    partition_function,
    save_spectrum,
    subsystem_thermal_entropy,
)
from .states import (
    RNG_ALGORITHM,
    PhaseVector,
    StateError,
    StateVector,
    apply_phases,
    evolve,
    sample_rpts,
    state_from_json,
    state_to_json,
    to_fock_basis,
)
from .entropy import (
    BipartitionTable,
    CoarseGraining,
    EntropyBreakdown,
    EntropyError,
    SpatialEnergyTable,
    energy_coarse_graining,
    entanglement_entropy,
    localized_entropy_prediction,
    max_entanglement_bound,
    mean_occupation_at_max_entanglement,
    observational_entropy,
    position_coarse_graining,
    reduced_density_matrix,
    spatial_energy_entropy,
    volume_law_prediction,
)
from .extremize import (
    ExtremizationResult,
    LocalizationError,
    LocalizationWindow,
    OptimizerConfig,
    align_phases,
    extremize_entropy,
    localization_projector,
    maximize_localization,
    middle_window,
    nelder_mead,
    pmax_beta_sweep,
)
from .drivers import (
    ExperimentConfig,
    EntropyTrace,
    compute_trace,
    fit_left_tail,
    run_beta_sweep,
    run_histogram,
    run_localized_entropy,
    run_pmax_sweep,
    run_size_sweep,
)

__version__ = "0.1.0"
