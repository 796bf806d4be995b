"""Alternating best-response game loop, tracing, and equilibrium checks.

Player 1 moves the first layer, player 2 the second; each acts on its own
period (s1, s2 steps) with phase offsets chosen so the two never act at the
same step. A step where a player acts solves that player's program under
whatever attack constraints are active and accepts the result through the
backtracking safeguard; other steps leave the state untouched.

Connectivity is tracked in two flavors per step: the live value (restricted
to robots not currently cut off, which is what the controllers optimize)
and the global value over all robots (0 for the whole duration of a dos).
The CSV trace reports the live value.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .attacks import AttackEvent, AttackKind, resolve_target
from .errors import InvalidSchedule, InvalidSpec
from .network import LayeredConfiguration, true_connectivity
from .subproblem import (
    StepResult,
    SubproblemSpec,
    accept_step,
    build_player_subproblem,
    default_trust_radius,
    effective_connectivity,
    solve_subproblem,
)


@dataclass(frozen=True)
class GameSchedule:
    """Update periods and phase offsets; player g acts at steps o_g + m*s_g."""

    s1: int
    s2: int
    o1: int = 0
    o2: int = 1

    def __post_init__(self):
        for name, v in (("s1", self.s1), ("s2", self.s2)):
            if not (isinstance(v, int) and v >= 1):
                raise InvalidSchedule(f"{name} must be a positive integer, got {v!r}")
        for name, v in (("o1", self.o1), ("o2", self.o2)):
            if not (isinstance(v, int) and v >= 0):
                raise InvalidSchedule(f"{name} must be a nonnegative integer, got {v!r}")
        # the two arithmetic progressions collide iff the offsets agree mod gcd
        if (self.o2 - self.o1) % math.gcd(self.s1, self.s2) == 0:
            raise InvalidSchedule(
                f"players would act at the same step: offsets {self.o1},{self.o2} "
                f"are congruent modulo gcd({self.s1},{self.s2})"
            )

    def actor_at(self, step: int) -> int | None:
        if step >= self.o1 and (step - self.o1) % self.s1 == 0:
            return 1
        if step >= self.o2 and (step - self.o2) % self.s2 == 0:
            return 2
        return None

    @property
    def round_length(self) -> int:
        return math.lcm(self.s1, self.s2)


@dataclass(frozen=True)
class GameSettings:
    """Solver-side knobs for every step.

    trust_radius None means the per-player default (a quarter of the acting
    layer's weight-decay band). safeguard False reproduces the raw scheme:
    no trust region, no backtracking, proposals accepted as returned.
    solve_monitor, when set, observes every solve (including backtracking
    re-solves) as monitor(spec, program, outcome); purely passive.
    """

    trust_radius: float | None = None
    max_backtracks: int = 6
    backtrack_tolerance: float = 1e-6
    safeguard: bool = True
    lock_altitude: tuple[bool, bool] = (False, False)
    solver_settings: dict | None = None
    solve_monitor: Callable[..., None] | None = None


@dataclass(frozen=True)
class GameLimits:
    max_steps: int
    conv_tolerance: float = 1e-4
    pos_tolerance: float = 1e-4
    ne_tolerance: float = 1e-4


@dataclass(frozen=True)
class TraceRow:
    step: int
    actor: int | None
    lambda2: float  # live-subnetwork value (equals global when nothing is removed)
    lambda2_global: float
    alpha: float | None  # epigraph value of the acting player's solve
    backtracks: int
    attacks: tuple[str, ...]
    positions: np.ndarray  # (n, 3) state after this step
    accepted: bool | None  # None when nobody acted
    solver_status: str


@dataclass(frozen=True)
class GameTrace:
    rows: tuple[TraceRow, ...]

    def __post_init__(self):
        for k, row in enumerate(self.rows):
            if row.step != k:
                raise InvalidSpec(f"trace steps must be contiguous from 0, found {row.step} at {k}")

    def lambda2_series(self) -> np.ndarray:
        return np.array([r.lambda2 for r in self.rows])


@dataclass(frozen=True)
class EquilibriumReport:
    converged: bool
    steps_to_convergence: int | None
    updates_to_convergence: int | None
    final_lambda2: float
    slack1: float
    slack2: float
    ne_tolerance: float
    reason: str = ""


def _attack_token(event: AttackEvent, target) -> str:
    if isinstance(target, tuple):
        return f"{event.kind.value}:{target[0]}-{target[1]}"
    return f"{event.kind.value}:{target}"


class _AttackBook:
    """Resolves worst-case targets at onset and answers per-step queries."""

    def __init__(self, events):
        self.events = tuple(events)
        self.resolved: dict[int, object] = {
            k: e.target for k, e in enumerate(self.events) if e.target is not None
        }

    def resolve_onsets(self, step: int, state: LayeredConfiguration):
        for k, e in enumerate(self.events):
            if e.start_step == step and k not in self.resolved:
                self.resolved[k] = resolve_target(state, e.kind, e.scope)

    def active(self, step: int):
        """(frozen robots, zeroed links, removed nodes, display tokens) at step."""
        frozen, zeroed, removed, tokens = set(), set(), set(), []
        for k, e in enumerate(self.events):
            if not e.active_at(step):
                continue
            t = self.resolved.get(k)
            if t is None:
                raise InvalidSpec(f"attack {k} active at step {step} but never resolved")
            if e.kind is AttackKind.SPOOF:
                frozen.add(t)
            elif e.kind is AttackKind.JAM:
                zeroed.add(t)
            else:
                removed.add(t)
            tokens.append(_attack_token(e, t))
        return frozenset(frozen), frozenset(zeroed), frozenset(removed), tuple(tokens)

    def quiet_after(self, step: int, round_length: int) -> bool:
        """True once every scripted event is at least one full round old.

        Convergence declared any earlier would be about the wrong game: a
        pre-attack equilibrium, or a state the newest constraint has not
        propagated through yet.
        """
        return all(step >= e.start_step + round_length for e in self.events)

    def resolved_events(self) -> list[dict]:
        out = []
        for k, e in enumerate(self.events):
            t = self.resolved.get(k)
            out.append(
                {
                    "kind": e.kind.value,
                    "target": list(t) if isinstance(t, tuple) else t,
                    "start_step": e.start_step,
                    "duration": e.duration,
                    "scope": e.scope.value,
                }
            )
        return out


def _player_spec(
    state: LayeredConfiguration,
    player: int,
    settings: GameSettings,
    frozen: frozenset,
    zeroed: frozenset,
    removed: frozenset,
) -> SubproblemSpec:
    if settings.safeguard:
        tr = settings.trust_radius if settings.trust_radius is not None else default_trust_radius(state, player)
    else:
        tr = None
    return SubproblemSpec(
        acting_player=player,
        current_state=state,
        frozen_robots=frozen,
        zeroed_links=zeroed,
        removed_nodes=removed,
        trust_radius=tr,
        lock_altitude=settings.lock_altitude[player - 1],
    )


def _solve_player(spec: SubproblemSpec, settings: GameSettings) -> StepResult:
    program = build_player_subproblem(spec)
    outcome = solve_subproblem(program, spec, settings.solver_settings, settings.solve_monitor)
    max_bt = settings.max_backtracks if settings.safeguard else 0
    return accept_step(
        spec,
        outcome,
        backtrack_tolerance=settings.backtrack_tolerance,
        max_backtracks=max_bt,
        settings=settings.solver_settings,
        monitor=settings.solve_monitor,
    )


def step_game(
    state: LayeredConfiguration,
    schedule: GameSchedule,
    attacks: _AttackBook | list[AttackEvent],
    step_index: int,
    settings: GameSettings = GameSettings(),
) -> tuple[LayeredConfiguration, TraceRow]:
    """Advance the game by one step; the state is returned unchanged on
    steps where neither player is scheduled."""
    book = attacks if isinstance(attacks, _AttackBook) else _AttackBook(attacks)
    book.resolve_onsets(step_index, state)
    frozen, zeroed, removed, tokens = book.active(step_index)
    actor = schedule.actor_at(step_index)
    if actor is None:
        new_state = state
        alpha, backtracks, accepted, status = None, 0, None, ""
        lam_live = effective_connectivity(state, zeroed, removed)
    else:
        spec = _player_spec(state, actor, settings, frozen, zeroed, removed)
        result = _solve_player(spec, settings)
        new_state = result.configuration
        last = result.outcomes[-1]
        alpha = last.epigraph_alpha
        backtracks = result.backtracks
        accepted = result.accepted
        status = last.status.value
        lam_live = result.lambda2_after
    row = TraceRow(
        step=step_index,
        actor=actor,
        lambda2=lam_live,
        lambda2_global=true_connectivity(new_state, zeroed, removed).lambda2,
        alpha=alpha,
        backtracks=backtracks,
        attacks=tokens,
        positions=new_state.positions.copy(),
        accepted=accepted,
        solver_status=status,
    )
    return new_state, row


def check_nash(
    state: LayeredConfiguration,
    ne_tolerance: float = 1e-4,
    settings: GameSettings = GameSettings(),
    frozen_robots: frozenset = frozenset(),
    zeroed_links: frozenset = frozenset(),
    removed_nodes: frozenset = frozenset(),
) -> EquilibriumReport:
    """One best-response re-solve per player; the state is an equilibrium
    when neither can lift the live connectivity more than ne_tolerance."""
    base = effective_connectivity(state, zeroed_links, removed_nodes)
    slacks = []
    for player in (1, 2):
        spec = _player_spec(state, player, settings, frozen_robots, zeroed_links, removed_nodes)
        result = _solve_player(spec, settings)
        slacks.append(max(0.0, result.lambda2_after - base))
    return EquilibriumReport(
        converged=slacks[0] <= ne_tolerance and slacks[1] <= ne_tolerance,
        steps_to_convergence=None,
        updates_to_convergence=None,
        final_lambda2=base,
        slack1=slacks[0],
        slack2=slacks[1],
        ne_tolerance=ne_tolerance,
        reason="",
    )


def run_until_convergence(
    initial_state: LayeredConfiguration,
    schedule: GameSchedule,
    attacks: list[AttackEvent],
    limits: GameLimits,
    settings: GameSettings = GameSettings(),
) -> tuple[GameTrace, EquilibriumReport]:
    """Iterate step_game until the state stagnates for one full round, then
    certify (or refute) the equilibrium with per-player re-solves.

    Stagnation means: over the last full round, the live connectivity moved
    less than conv_tolerance and no coordinate moved more than
    pos_tolerance. While any scripted attack has not yet been active for a
    full round, stagnation is ignored: converging before (or right at) an
    onset would certify an equilibrium of the wrong constraint set.
    """
    book = _AttackBook(attacks)
    rows: list[TraceRow] = []
    state = initial_state
    R = schedule.round_length
    stagnated_at = None
    for k in range(limits.max_steps):
        state, row = step_game(state, schedule, book, k, settings)
        rows.append(row)
        if len(rows) > R and book.quiet_after(k, R):
            window = rows[-(R + 1):]
            lam = [r.lambda2 for r in window]
            if max(lam) - min(lam) < limits.conv_tolerance:
                moves = max(
                    float(np.max(np.abs(r.positions - window[-1].positions))) for r in window
                )
                if moves < limits.pos_tolerance:
                    stagnated_at = k
                    break
    trace = GameTrace(rows=tuple(rows))
    frozen, zeroed, removed, _ = book.active(rows[-1].step if rows else 0)
    ne = check_nash(
        state,
        limits.ne_tolerance,
        settings,
        frozen_robots=frozen,
        zeroed_links=zeroed,
        removed_nodes=removed,
    )
    if stagnated_at is None:
        report = replace(
            ne,
            converged=False,
            reason=f"no stagnation within max_steps={limits.max_steps}",
        )
    else:
        steps = stagnated_at + 1
        updates = sum(1 for r in rows if r.actor is not None)
        report = replace(
            ne,
            steps_to_convergence=steps,
            updates_to_convergence=updates,
            reason="" if ne.converged else "stagnated but a player can still improve",
        )
    return trace, report


# ---------------------------------------------------------------------------
# trace export

CSV_FIXED_COLUMNS = ("step", "actor", "lambda2", "alpha", "backtracks", "attacks")


def trace_csv_text(trace: GameTrace) -> str:
    """Deterministic CSV: fixed columns then x/y/z per robot; floats via repr."""
    if not trace.rows:
        return ",".join(CSV_FIXED_COLUMNS) + "\n"
    n = trace.rows[0].positions.shape[0]
    header = list(CSV_FIXED_COLUMNS)
    for i in range(n):
        header += [f"x{i}", f"y{i}", f"z{i}"]
    lines = [",".join(header)]
    for r in trace.rows:
        cells = [
            str(r.step),
            "" if r.actor is None else str(r.actor),
            repr(r.lambda2),
            "" if r.alpha is None else repr(r.alpha),
            str(r.backtracks),
            "|".join(r.attacks),
        ]
        for i in range(n):
            cells += [repr(float(r.positions[i, c])) for c in range(3)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: GameTrace, path: str):
    with open(path, "w", newline="\n") as fh:
        fh.write(trace_csv_text(trace))


def report_to_json_dict(report: EquilibriumReport) -> dict:
    return {
        "converged": report.converged,
        "steps_to_convergence": report.steps_to_convergence,
        "updates_to_convergence": report.updates_to_convergence,
        "final_lambda2": report.final_lambda2,
        "slack1": report.slack1,
        "slack2": report.slack2,
        "ne_tolerance": report.ne_tolerance,
        "reason": report.reason,
    }


def trace_to_json_dict(trace: GameTrace, report: EquilibriumReport | None = None) -> dict:
    rows = []
    for r in trace.rows:
        rows.append(
            {
                "step": r.step,
                "actor": r.actor,
                "lambda2": r.lambda2,
                "lambda2_global": r.lambda2_global,
                "alpha": r.alpha,
                "backtracks": r.backtracks,
                "attacks": list(r.attacks),
                "accepted": r.accepted,
                "solver_status": r.solver_status,
                "positions": [[float(v) for v in p] for p in r.positions],
            }
        )
    out: dict = {"rows": rows}
    if report is not None:
        out["equilibrium"] = report_to_json_dict(report)
    return out


def write_trace_json(trace: GameTrace, report: EquilibriumReport | None, path: str):
    with open(path, "w") as fh:
        json.dump(trace_to_json_dict(trace, report), fh, indent=2)
        fh.write("\n")
