"""Spectral wavepacket dynamics with pilot-wave trajectories and
classical-limit verification tools."""

from .grids import (
    FRAME_CENTER_OF_MASS,
    FRAME_LABORATORY,
    ConfigurationError,
    DomainError,
    Grid,
    NormalizationError,
    PolarField,
    WaveField,
    boundary_mass,
    density,
    expectation_position,
    gaussian_packet,
    l2_distance,
    make_grid,
    normalize,
    position_variance,
    shift_field,
)
from .potentials import PotentialSpec
from .propagate import (
    DivergenceError,
    EvolutionRecord,
    evolve_full_two_body,
    split_step_evolve,
)
from .madelung import (
    VelocityField,
    madelung_residuals,
    polar_to_field,
    quantum_potential,
    to_polar,
    velocity_field,
)
from .bohm import (
    Ensemble,
    Trajectory,
    equivariance_check,
    integrate_dbb,
    integrate_ensemble,
    sample_ensemble,
    sample_initial,
)
from .classical import (
    ConvergenceReport,
    FocalPointError,
    HJSolution,
    SweepScenario,
    euler_lagrange_action,
    hbar_sweep,
    minimize_path_action,
    minplus_action,
    newton_trajectory,
    solve_hj,
    transport_density,
)
from .coherent import (
    CoherentParams,
    classical_oscillator,
    coherent_field,
    coherent_polar,
    coherent_record,
    delta_convergence_check,
    g_phase,
)
from .framesplit import (
    TwoScaleState,
    cm_coordinates,
    evolve_two_scale,
    extract_factors,
    product_on_config,
    reconstruct_internal,
    two_scale_grids,
    verify_factorization,
    verify_factorization_config,
)
from .manybody import (
    ManyBodyState,
    delta_approx_step,
    hartree_step,
    overlap_matrix,
    product_internal,
    run_manybody,
)

__version__ = "0.1.0"
