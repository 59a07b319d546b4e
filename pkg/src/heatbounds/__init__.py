"""Dissipated heat of a spin-1/2 relaxing into a bosonic environment, with
its entropic and thermodynamic (fluctuation-relation) lower bounds.

The engine integrates the counting-field Bloch equation of the second-order
time-convolutionless generator; an exact truncated-environment reference
validates it.  See README.md for the command-line interface and demos.
"""

from .bath import (
    BathDomainError,
    BathParams,
    DiscreteModes,
    OhmicExpCutoff,
    QuadratureError,
    SpectralDensity,
    bose_occupation,
    correlation_eta_derivative,
    correlation_opposite_sign,
    correlation_same_sign,
    discretize_ohmic,
    h_pm,
)
from .dynamics import (
    BlochVector,
    PropagatorTrajectory,
    SolverFailure,
    SolverOptions,
    Trajectory,
    evolve,
    evolve_propagator,
    evolve_with_sensitivity,
    steady_state_check,
)
from .generator import (
    GeneratorCoefficients,
    assemble_G,
    assemble_dG_deta,
    coefficient_rates,
    sensitivity_coefficient_rates,
)
from .observables import (
    BoundsSeries,
    CrossoverResult,
    NonpositiveTraceError,
    bounds_from_trajectories,
    cgf,
    crossover_time,
    entropic_bound,
    entropic_bound_closed_form,
    entropy_from_norm,
    mean_heat,
    thermodynamic_bound,
    von_neumann_entropy,
)
from .oracle import (
    LandauerTerms,
    Tcl2ExactReport,
    TruncatedEnvironment,
    TruncationError,
    build_hamiltonians,
    exact_heat,
    exact_modified_trace,
    exact_total_state,
    landauer_equality_terms,
    tcl2_vs_exact_report,
)
from .sweep import (
    GridSpec,
    SweepRecord,
    SweepSeries,
    bloch_disk_grid,
    crossover_map,
    sweep_bounds,
    sweep_bounds_series,
)

__version__ = "0.1.0"
