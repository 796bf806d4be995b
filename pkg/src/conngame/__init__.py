"""Decentralized connectivity maximization for layered robot networks.

Two robot layers alternately re-solve a semidefinite step program that
maximizes the network's algebraic connectivity, while scripted adversarial
events (GPS spoofing, link jamming, denial of service) perturb the game.
"""

from .errors import (
    ConnGameError,
    DegenerateDistance,
    EmptyScope,
    InvalidSchedule,
    InvalidSpec,
    NoSuchEdge,
    NoSuchNode,
    NumericalFailure,
    NumericalTrouble,
    ScenarioParseError,
    ScenarioValidationError,
    ShapeMismatch,
    SubproblemInfeasible,
)
from .spectral import (
    LaplacianMatrix,
    SpectralResult,
    WeightedGraph,
    algebraic_connectivity,
    build_laplacian,
    connected_components,
    edm_validity,
    load_graph,
    ones_complement_basis,
    perturbed_laplacian_link,
    perturbed_laplacian_node,
    save_graph,
)
from .network import (
    LayeredConfiguration,
    LinkClass,
    WeightModel,
    assemble_global_graph,
    link_weight,
    link_weight_gradient,
    true_connectivity,
)
from .conic import ConicProgram, ProgramBuilder, Residuals, solve_program
from .subproblem import (
    OutcomeStatus,
    SolveOutcome,
    StepResult,
    SubproblemSpec,
    accept_step,
    build_player_subproblem,
    default_trust_radius,
    effective_connectivity,
    solve_subproblem,
)
from .attacks import (
    AttackEvent,
    AttackImpact,
    AttackKind,
    AttackScope,
    attack_impact,
    attack_plan_report,
    drop_bound_link,
    drop_bound_node,
    resolve_target,
    select_dos_target,
    select_jam_target,
    select_spoof_target,
)
from .engine import (
    EquilibriumReport,
    GameLimits,
    GameSchedule,
    GameSettings,
    GameTrace,
    TraceRow,
    check_nash,
    run_until_convergence,
    step_game,
    trace_csv_text,
    write_trace_csv,
    write_trace_json,
)
from .scenario import (
    RunArtifacts,
    Scenario,
    bundled_scenario_names,
    bundled_scenario_path,
    load_scenario,
    load_state,
    run_scenario,
    save_state,
    scenario_from_dict,
)

__version__ = "0.1.0"
