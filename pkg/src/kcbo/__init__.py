"""Kinetic consensus-based optimization with Lyapunov and admissibility diagnostics."""

from .admissibility import (
    Admissibility,
    AdmissibilityReport,
    CenteredDecay,
    PoC,
    Stability,
    check_assumptions,
    decay_rates,
    mu_gap,
    norm_equiv,
    suggest_admissible,
)
from .consensus import ConsensusPoint, delta_alpha, noise_matrix_apply, tau, weighted_consensus
from .core import (
    OBJECTIVES,
    InitialLaw,
    KineticParams,
    NoiseKind,
    ObjectiveSpec,
    ParticleEnsemble,
    RngStream,
    gaussian_increments,
    make_objective,
)
from .diagnostics import (
    LyapunovReport,
    ShiftedState,
    centered_moment,
    centered_shifted,
    coupled_w2_bound,
    coupling_energy,
    exact_w2_1d,
    lstd_functional,
    lyapunov_Lp,
    lyapunov_report,
    phi_functional,
    psi2_functional,
)
from .dynamics import (
    ConsensusMode,
    CoupledPair,
    coupled_step,
    em_step,
    em_step_first_order,
    run_trajectory,
)
from .errors import (
    AdmissibilityError,
    BlowupError,
    DimensionError,
    EmptyEnsembleError,
    InsufficientDataError,
    KCBOError,
    NoAdmissibleParams,
    NumericalError,
    ParameterError,
    ShapeMismatchError,
    UnknownObjectiveError,
)

__version__ = "0.1.0"
