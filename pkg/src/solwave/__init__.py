"""solwave: numerical laboratory for wave-particle soliton scattering.

A scalar wave field on a periodic 3-d grid is coupled to a relativistic
particle; the package constructs admissible coupling densities, the
closed-form soliton family and its tangent frames, the symplectic
projection onto the solitary manifold, the Laplace-domain resolvent
matrices of the frozen linearization, pseudo-spectral time integrators
for the nonlinear and linearized flows, and the long-time diagnostics
(weighted-norm decay, modulation tracks, scattering states).
"""

from .charge import (
    ChargeDensity,
    check_moments,
    check_wiener,
    make_admissible_density,
    spectral_density,
    total_charge,
)
from .diagnostics import (
    DecayFit,
    ModulationTrack,
    extract_modulation,
    fit_decay,
    majorant_and_drift,
    scattering_state,
    weighted_norm,
)
from .dynamics import (
    SimConfig,
    Trajectory,
    frozen_hamiltonian,
    hamiltonian,
    interaction_lower_bound,
    run_linearized,
    run_nonlinear,
    wave_group,
)
from .errors import (
    AccuracyError,
    BasinError,
    BlowupError,
    DegeneracyError,
    DomainError,
    GridError,
    PoleError,
    ResolutionError,
    SingularSourceError,
    SolwaveError,
)
from .grid import Grid3
from .soliton import (
    FieldPair,
    LinState,
    PhaseState,
    SolitonParams,
    TangentFrame,
    bv_inverse,
    bv_matrix,
    gamma_of,
    momentum_of_velocity,
    nu_of,
    soliton_field,
    soliton_state,
    tangent_frame,
    translate,
    velocity_of_momentum,
)
from .spectral import (
    PhiEval,
    SpectralEval,
    g_lambda,
    g_lambda_grid,
    h_convolution,
    inverse_blocks,
    kh_matrices,
    on_axis,
    phi_eval,
    phi_time_domain,
    r_at_zero,
    rotation_to_axis,
)
from .symplectic import (
    OmegaMatrix,
    ProjectionResult,
    decompose,
    omega_matrix,
    project_to_manifold,
    project_transversal,
    symplectic_form,
)

__version__ = "0.1.0"
