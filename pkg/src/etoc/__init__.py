"""Expected-time optimal control via particle consensus and sum-of-norm costs.

The library plans minimum expected-time trajectories for a dynamical
system whose initial state is uncertain. Uncertainty is represented by
sampled particles that share a consensus control prefix; the expected
terminal time is relaxed to a temporally weighted sum of state norms,
which keeps every subproblem a second-order cone program. Linear models
solve in one shot; nonlinear models go through a penalized trust-region
SCP loop.
"""

from .models import (
    DynamicsModel,
    LinearDynamics,
    DubinsCar,
    double_integrator,
    double_integrator_1d,
    dubins_car,
    linearize_along,
)
from .stochastic import GaussianSpec, ParticleEnsemble, sample_ensemble, measurement_update
from .transcription import (
    SolveConfig,
    VariableLayout,
    ScalingMap,
    build_problem4_linear,
    build_ptr_subproblem,
    with_initial_states,
)
from .scp import (
    TrajectorySolution,
    SubproblemInfeasible,
    initial_guess,
    make_scaling,
    solve_expected_time,
    propagation_residual,
)
from .dubins import Pose, DubinsResult, shortest_path, sample_path, completion_steps, pose_from_state
from .conic import ConicProgram, ConicSolution, SecondOrderCone, SolverSettings, solve
from .soncost import (
    WeightSequence,
    custom_weights,
    TerminalReport,
    weight_sequence,
    expected_sonc_cost,
    terminal_step,
    check_persistence,
    terminal_report,
)
from .harness import (
    McSummary,
    ClosedLoopTrace,
    run_open_loop_mc,
    run_closed_loop,
    deterministic_min_time_policy,
    sweep_weights,
    sweep_consensus,
)

__version__ = "0.1.0"
