"""Entanglement generation in engineered XX spin chains.

Exact-diagonalization and Lindblad simulations of two boundary-entangling
protocols (staggered and dual-port coupling patterns), their robustness
under static disorder and dephasing, and the closed-form effective models
that explain them.
"""

__version__ = "0.1.0"

from .chain import (
    ChainSpec,
    DisorderRealization,
    build_hamiltonian,
    coupling_pattern,
    draw_disorder,
    initial_state,
    sector_hamiltonian,
    stream_seed,
    working_sector,
)
from .dynamics import (
    QuantumState,
    Trajectory,
    UnitaryPropagator,
    evolve_lindblad,
    evolve_unitary,
    lindblad_rhs,
)
from .effective import (
    DispersiveParams,
    TrimerParams,
    chi,
    dispersive_params,
    entangling_time,
    evolve_effective_pair,
    gamma_eff,
    mean_bulk_excitation,
    trimer_eta,
    trimer_evolve,
    validity_margin,
)
from .measures import (
    EndPairState,
    PeakRecord,
    bell_state,
    end_pair_series,
    fidelity,
    negativity,
    negativity_series,
    peak_scan,
    populations,
    reduce_end_pair,
    rz_correct,
)
from .qcore import (
    FullBasis,
    Operator,
    SectorBasis,
    Spin,
    embed_site,
    project_to_sector,
    sector_basis,
    spin_matrices,
)
from .sweeps import (
    FieldScanResult,
    SweepConfig,
    SweepResult,
    clean_peak,
    negativity_trajectory,
    optimize_boundary_field,
    run_dephasing_sweep,
    run_disorder_sweep,
    scan_boundary_field,
)
from .validate import ValidationCheck, run_validation

__all__ = [
    "ChainSpec",
    "DisorderRealization",
    "DispersiveParams",
    "EndPairState",
    "FieldScanResult",
    "FullBasis",
    "Operator",
    "PeakRecord",
    "QuantumState",
    "SectorBasis",
    "Spin",
    "SweepConfig",
    "SweepResult",
    "Trajectory",
    "TrimerParams",
    "UnitaryPropagator",
    "ValidationCheck",
    "bell_state",
    "build_hamiltonian",
    "chi",
    "clean_peak",
    "coupling_pattern",
    "dispersive_params",
    "draw_disorder",
    "embed_site",
    "end_pair_series",
    "entangling_time",
    "evolve_effective_pair",
    "evolve_lindblad",
    "evolve_unitary",
    "fidelity",
    "gamma_eff",
    "initial_state",
    "lindblad_rhs",
    "mean_bulk_excitation",
    "negativity",
    "negativity_series",
    "negativity_trajectory",
    "optimize_boundary_field",
    "peak_scan",
    "populations",
    "project_to_sector",
    "reduce_end_pair",
    "run_dephasing_sweep",
    "run_disorder_sweep",
    "run_validation",
    "rz_correct",
    "scan_boundary_field",
    "sector_basis",
    "sector_hamiltonian",
    "spin_matrices",
    "stream_seed",
    "trimer_eta",
    "trimer_evolve",
    "validity_margin",
    "working_sector",
]
