"""Collective persistency of excitation for multi-trajectory data.

Hankel compositions (mosaic, cumulative, hybrid), excitation checks,
experiment design, identification and data-driven control.
"""

from .control import (
    BehavioralBasis,
    MpcProblem,
    build_behavioral_basis,
    build_impulse_operators,
    mpc_run,
    mpc_step,
    represent_trajectory,
    synthesize_gain,
    warm_up,
)
from .design import DesignRequest, design_signals, minimal_lengths, verify_design
from .errors import CpeKitError, ComputationError, InputError
from .hankel import CompositionMode, HankelMatrix, build_composite, build_hankel
from .identification import (
    DistributedState,
    IdentifierState,
    ls_identify,
    run_adaptive,
    run_distributed,
)
from .informativity import (
    AlphaPolicy,
    CpeReport,
    check_cpe,
    check_pe,
    check_rank_condition,
    verify_transformations,
)
from .linalg import lmi_feasibility, numeric_rank, qp_solve_eq
from .trajectories import (
    GraphTopology,
    IoRecord,
    LtiSystem,
    Trajectory,
    TrajectoryBundle,
    builtin_system,
    simulate_lti,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaPolicy",
    "BehavioralBasis",
    "CompositionMode",
    "ComputationError",
    "CpeKitError",
    "CpeReport",
    "DesignRequest",
    "DistributedState",
    "GraphTopology",
    "HankelMatrix",
    "IdentifierState",
    "InputError",
    "IoRecord",
    "LtiSystem",
    "MpcProblem",
    "Trajectory",
    "TrajectoryBundle",
    "build_behavioral_basis",
    "build_composite",
    "build_hankel",
    "build_impulse_operators",
    "builtin_system",
    "check_cpe",
    "check_pe",
    "check_rank_condition",
    "design_signals",
    "lmi_feasibility",
    "ls_identify",
    "minimal_lengths",
    "mpc_run",
    "mpc_step",
    "numeric_rank",
    "qp_solve_eq",
    "represent_trajectory",
    "run_adaptive",
    "run_distributed",
    "simulate_lti",
    "synthesize_gain",
    "verify_design",
    "verify_transformations",
    "warm_up",
]
