import numpy as np
import pytest

from conngame import (
    InvalidSpec,
    LayeredConfiguration,
    OutcomeStatus,
    SubproblemInfeasible,
    SubproblemSpec,
    WeightModel,
    accept_step,
    build_player_subproblem,
    default_trust_radius,
    edm_validity,
    effective_connectivity,
    solve_subproblem,
)
from conngame.conic import RESIDUAL_TOLERANCE
from conngame.subproblem import SolveOutcome, linearized_connectivity, stay_put_candidate


def _solve(spec):
    return solve_subproblem(build_player_subproblem(spec), spec)


def _has_pin_row(program, var_index, rhs):
    for row, b in zip(program.eq_lhs, program.eq_rhs):
        nz = np.nonzero(row)[0]
        if len(nz) == 1 and nz[0] == var_index and row[nz[0]] == 1.0 and b == rhs:
            return True
    return False


def test_spec_validation():
    cfg = LayeredConfiguration(
        layer1_positions=np.array([[0.0, 0.0, 0.0]]),
        layer2_positions=np.array([[2.0, 0.0, 0.0]]),
        model_inter1=WeightModel(1, 3, 5),
        model_inter2=WeightModel(1, 3, 5),
        model_intra=WeightModel(1.5, 5, 4),
        d1=0.4,
        d2=0.4,
    )
    with pytest.raises(InvalidSpec):
        SubproblemSpec(acting_player=3, current_state=cfg)
    with pytest.raises(InvalidSpec):
        SubproblemSpec(acting_player=1, current_state=cfg, frozen_robots={9})
    with pytest.raises(InvalidSpec):
        SubproblemSpec(acting_player=1, current_state=cfg, zeroed_links={(1, 1)})
    with pytest.raises(InvalidSpec):
        SubproblemSpec(acting_player=1, current_state=cfg, trust_radius=-1.0)
    spec = SubproblemSpec(acting_player=1, current_state=cfg, zeroed_links={(1, 0)})
    assert spec.zeroed_links == frozenset({(0, 1)})
    assert spec.pinned_robots == frozenset({1})
    assert spec.with_trust_radius(0.25).trust_radius == 0.25


def test_single_robot_layers_program_structure():
    cfg = LayeredConfiguration(
        layer1_positions=np.array([[0.0, 0.0, 1.0]]),
        layer2_positions=np.array([[2.0, 0.0, 0.0]]),
        model_inter1=WeightModel(1, 3, 5),
        model_inter2=WeightModel(1, 3, 5),
        model_intra=WeightModel(1.5, 5, 4),
        d1=0.4,
        d2=0.4,
    )
    spec = SubproblemSpec(acting_player=1, current_state=cfg, trust_radius=0.5)
    prog = build_player_subproblem(spec)
    assert [b.name for b in prog.blocks] == ["alpha", "positions", "zdist"]
    assert prog.slice_of("positions") == slice(1, 7)
    assert prog.slice_of("zdist").stop == prog.slice_of("zdist").start  # no pairs
    # a single-robot acting layer pins exactly the other robot: 3 rows
    assert prog.eq_lhs.shape[0] == 3
    # the connectivity block lives on the 1-dimensional live complement
    assert prog.psd_blocks[-1].dim == 1
    out = _solve(spec)
    assert out.status is OutcomeStatus.OPTIMAL
    # the pinned robot did not move, bitwise
    assert np.array_equal(out.next_positions[1], cfg.positions[1])


def test_spoofed_robot_is_pinned(square_config):
    spec = SubproblemSpec(
        acting_player=1, current_state=square_config, frozen_robots={0}, trust_radius=0.5
    )
    prog = build_player_subproblem(spec)
    pos_start = prog.slice_of("positions").start
    for c in range(3):
        assert _has_pin_row(prog, pos_start + 0 * 3 + c, square_config.positions[0, c])
    out = _solve(spec)
    assert out.status is OutcomeStatus.OPTIMAL
    assert np.array_equal(out.next_positions[0], square_config.positions[0])
    assert not np.array_equal(out.next_positions[1], square_config.positions[1])


def test_altitude_lock_rows(square_config):
    spec = SubproblemSpec(
        acting_player=2, current_state=square_config, trust_radius=0.5, lock_altitude=True
    )
    out = _solve(spec)
    assert out.status is OutcomeStatus.OPTIMAL
    assert abs(out.next_positions[2, 2] - square_config.positions[2, 2]) < 1e-9
    assert abs(out.next_positions[3, 2] - square_config.positions[3, 2]) < 1e-9


def test_stay_put_candidate_is_feasible(config_factory):
    rng = np.random.default_rng(17)
    for _ in range(25):
        cfg = config_factory(rng)
        for player in (1, 2):
            spec = SubproblemSpec(
                acting_player=player,
                current_state=cfg,
                trust_radius=default_trust_radius(cfg, player),
            )
            prog = build_player_subproblem(spec)
            x = stay_put_candidate(spec, prog)
            assert prog.residuals(x).within(RESIDUAL_TOLERANCE)


def test_epigraph_alpha_matches_linearized_lambda2(square_config):
    spec = SubproblemSpec(acting_player=1, current_state=square_config, trust_radius=0.5)
    out = _solve(spec)
    assert out.status is OutcomeStatus.OPTIMAL
    lam_lin = linearized_connectivity(spec, out.next_positions)
    assert abs(out.epigraph_alpha - lam_lin) <= 1e-5


def test_linearization_exact_at_current_state(square_config):
    spec = SubproblemSpec(acting_player=1, current_state=square_config)
    lam_lin = linearized_connectivity(spec, square_config.positions)
    assert abs(lam_lin - effective_connectivity(square_config)) < 1e-12


def test_secant_one_dimensional_example():
    # robots at x = 0 and x = 1; moving the second to x = 2 must give Z = 3,
    # an underestimate of the true squared distance 4
    cfg = LayeredConfiguration(
        layer1_positions=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
        layer2_positions=np.array([[0.5, 2.0, 0.0]]),
        model_inter1=WeightModel(1, 3, 5),
        model_inter2=WeightModel(1, 3, 5),
        model_intra=WeightModel(1.5, 5, 4),
        d1=0.01,
        d2=0.01,
    )
    spec = SubproblemSpec(acting_player=1, current_state=cfg)
    prog = build_player_subproblem(spec)
    x = np.zeros(prog.total_size)
    candidate = cfg.positions.copy()
    candidate[1] = [2.0, 0.0, 0.0]
    x[prog.slice_of("positions")] = candidate.reshape(-1)
    zsl = prog.slice_of("zdist")

    x[zsl.start] = 3.0
    eq = prog.eq_lhs @ x - prog.eq_rhs
    assert float(np.max(np.abs(eq))) < 1e-12

    x[zsl.start] = 4.0  # the true squared distance does NOT satisfy the secant
    eq = prog.eq_lhs @ x - prog.eq_rhs
    assert abs(float(np.max(np.abs(eq))) - 1.0) < 1e-12


def test_solved_z_underestimates_true_distance(square_config):
    spec = SubproblemSpec(acting_player=2, current_state=square_config, trust_radius=0.5)
    out = _solve(spec)
    assert out.status is OutcomeStatus.OPTIMAL
    for (i, j) in spec.acting_pairs:
        true_sq = float(np.sum((out.next_positions[i] - out.next_positions[j]) ** 2))
        assert out.z_matrix[i, j] <= true_sq + 1e-7
        assert out.z_matrix[i, j] >= square_config.d2 - 1e-9


def test_z_matrix_is_a_valid_edm(square_config):
    spec = SubproblemSpec(acting_player=1, current_state=square_config, trust_radius=0.5)
    out = _solve(spec)
    assert np.allclose(np.diag(out.z_matrix), 0.0)
    assert edm_validity(out.z_matrix, tol=-1e-7)


def test_solver_beats_grid_search_over_one_free_robot():
    # freeze all but one robot; the optimum over the trust box must match a
    # dense grid search of the linearized connectivity to grid resolution
    cfg = LayeredConfiguration(
        layer1_positions=np.array([[0.0, 0.0, 0.0], [1.2, 0.0, 0.0]]),
        layer2_positions=np.array([[0.6, 1.0, 0.0]]),
        model_inter1=WeightModel(1, 3, 5),
        model_inter2=WeightModel(1, 3, 5),
        model_intra=WeightModel(1.5, 5, 4),
        d1=0.25,
        d2=0.25,
    )
    tr = 0.5
    spec = SubproblemSpec(
        acting_player=1,
        current_state=cfg,
        frozen_robots={0},
        trust_radius=tr,
        lock_altitude=True,
    )
    out = _solve(spec)
    assert out.status is OutcomeStatus.OPTIMAL

    base = cfg.positions[1].copy()
    best = -np.inf
    for dx in np.linspace(-tr, tr, 41):
        for dy in np.linspace(-tr, tr, 41):
            cand = cfg.positions.copy()
            cand[1] = base + [dx, dy, 0.0]
            z = 2.0 * float((cand[0] - cand[1]) @ (cfg.positions[0] - cfg.positions[1])) - float(
                np.sum((cfg.positions[0] - cfg.positions[1]) ** 2)
            )
            if z < cfg.d1:  # the secant floor prunes this grid point
                continue
            best = max(best, linearized_connectivity(spec, cand))
    assert out.epigraph_alpha >= best - 1e-6
    assert out.epigraph_alpha <= best + 0.05  # grid resolution slack


def test_oversized_trust_radius_forces_backtracking(square_config):
    spec = SubproblemSpec(
        acting_player=1,
        current_state=square_config,
        trust_radius=10.0 * square_config.model_inter1.rho2,
    )
    result = accept_step(spec, _solve(spec))
    assert result.backtracks >= 1
    assert result.lambda2_after >= result.lambda2_before - 1e-6


def test_alternating_steps_do_not_decrease_connectivity(square_config):
    cfg = square_config
    lam = [effective_connectivity(cfg)]
    for k in range(6):
        player = 1 + (k % 2)
        spec = SubproblemSpec(
            acting_player=player,
            current_state=cfg,
            trust_radius=default_trust_radius(cfg, player),
        )
        result = accept_step(spec, _solve(spec))
        cfg = result.configuration
        lam.append(result.lambda2_after)
    diffs = np.diff(np.array(lam))
    assert np.all(diffs >= -1e-6)
    assert lam[-1] > lam[0]  # the square has real room to improve


def test_removed_robot_is_pinned_and_excluded(square_config):
    spec = SubproblemSpec(
        acting_player=2, current_state=square_config, removed_nodes={3}, trust_radius=0.5
    )
    out = _solve(spec)
    assert out.status is OutcomeStatus.OPTIMAL
    assert np.array_equal(out.next_positions[3], square_config.positions[3])
    lam_live = linearized_connectivity(spec, out.next_positions)
    assert abs(out.epigraph_alpha - lam_live) <= 1e-5


def test_jammed_pair_contributes_nothing(square_config):
    spec = SubproblemSpec(acting_player=1, current_state=square_config, zeroed_links={(0, 1)})
    lam = linearized_connectivity(spec, square_config.positions)
    assert abs(lam - effective_connectivity(square_config, zeroed_links={(0, 1)})) < 1e-12


def test_corrupted_state_raises_infeasible_with_diagnostics():
    cfg = LayeredConfiguration(
        layer1_positions=np.array([[0.0, 0.0, 0.0], [0.5477, 0.0, 0.0]]),  # squared 0.3 < 0.4
        layer2_positions=np.array([[0.0, 2.0, 0.0], [2.0, 2.0, 0.0]]),
        model_inter1=WeightModel(1, 3, 5),
        model_inter2=WeightModel(1, 3, 5),
        model_intra=WeightModel(1.5, 5, 4),
        d1=0.4,
        d2=0.4,
    )
    spec = SubproblemSpec(acting_player=1, current_state=cfg, trust_radius=0.01)
    with pytest.raises(SubproblemInfeasible, match="min-distance"):
        accept_step(spec, _solve(spec))


def test_numerical_trouble_is_retried_with_smaller_radius(square_config):
    fake = SolveOutcome(
        status=OutcomeStatus.NUMERICAL_TROUBLE,
        next_positions=None,
        epigraph_alpha=None,
        z_matrix=None,
        iterations=0,
        residuals=None,
        backend_status="synthetic",
    )
    spec = SubproblemSpec(acting_player=1, current_state=square_config, trust_radius=0.5)
    result = accept_step(spec, fake)
    assert result.accepted
    assert result.backtracks >= 1

    no_radius = SubproblemSpec(acting_player=1, current_state=square_config)
    null = accept_step(no_radius, fake)
    assert not null.accepted
    assert null.configuration is square_config


def test_default_trust_radius_follows_decay_band():
    cfg = LayeredConfiguration(
        layer1_positions=np.array([[0.0, 0.0, 1.0], [2.0, 0.0, 1.0]]),
        layer2_positions=np.array([[0.0, 2.0, 0.0], [2.0, 2.0, 0.0]]),
        model_inter1=WeightModel(1, 3, 5),
        model_inter2=WeightModel(0.5, 4.5, 5),
        model_intra=WeightModel(1.5, 5, 4),
        d1=0.4,
        d2=0.4,
    )
    assert default_trust_radius(cfg, 1) == 0.5
    assert default_trust_radius(cfg, 2) == 1.0
