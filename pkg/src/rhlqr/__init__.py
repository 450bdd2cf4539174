"""Receding-horizon controller synthesis for time-varying LQR problems with
certified infinite-horizon performance loss."""

from .certificate import (
    Certificate,
    build_certificate,
    candidate_distance_bound,
    corollary_horizon,
    horizon_for_tolerance,
    penalty_sequence,
    terminal_candidate,
)
from .closedloop import (
    BaseTrajectory,
    ClosedLoopReport,
    PerformanceLoss,
    PolicyRealization,
    performance_loss,
    rh_gains,
    simulate,
    unlift_controls,
)
from .errors import (
    CertificationError,
    InputError,
    LiftingConsistencyError,
    MarginViolation,
    NoUniformDepth,
    NumericalError,
    RhlqrError,
    StabilityFailure,
    VerificationError,
)
from .fileio import emit_problem, parse_problem, problem_digest
from .lifting import (
    LiftedProblem,
    LiftingIntermediates,
    ProblemData,
    controllability_matrix,
    find_min_d,
    lift,
    lifting_intermediates,
    observability_matrix,
    state_transition,
)
from .oracle import StackedLQ, build_stacked, solve_stacked, stacked_value
from .riccati import (
    ContractionConstants,
    PenaltySequence,
    RiccatiApprox,
    contraction_constants,
    riccati_apply,
    riccati_compose,
    solve_infinite_horizon,
)
from .scenarios import generate_scenario
from .spd import (
    SpdMatrix,
    psd_sqrt,
    riemannian_distance,
    spd_gap_bound,
    spd_log,
    spd_sqrt,
)
from .verify import verify_problem

__version__ = "0.1.0"

__all__ = [
    "BaseTrajectory",
    "Certificate",
    "CertificationError",
    "ClosedLoopReport",
    "ContractionConstants",
    "InputError",
    "LiftedProblem",
    "LiftingConsistencyError",
    "LiftingIntermediates",
    "MarginViolation",
    "NoUniformDepth",
    "NumericalError",
    "PenaltySequence",
    "PerformanceLoss",
    "PolicyRealization",
    "ProblemData",
    "RhlqrError",
    "RiccatiApprox",
    "SpdMatrix",
    "StabilityFailure",
    "StackedLQ",
    "VerificationError",
    "build_certificate",
    "build_stacked",
    "candidate_distance_bound",
    "contraction_constants",
    "controllability_matrix",
    "corollary_horizon",
    "emit_problem",
    "find_min_d",
    "generate_scenario",
    "horizon_for_tolerance",
    "lift",
    "lifting_intermediates",
    "observability_matrix",
    "parse_problem",
    "penalty_sequence",
    "performance_loss",
    "problem_digest",
    "psd_sqrt",
    "rh_gains",
    "riccati_apply",
    "riccati_compose",
    "riemannian_distance",
    "simulate",
    "solve_infinite_horizon",
    "solve_stacked",
    "spd_gap_bound",
    "spd_log",
    "spd_sqrt",
    "stacked_value",
    "state_transition",
    "terminal_candidate",
    "unlift_controls",
    "verify_problem",
]
