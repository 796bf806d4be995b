"""One player's connectivity-maximization step as a conic program.

Each step solves, for the acting layer, an epigraph semidefinite program:

    maximize  alpha
    s.t.      L_lin(x) >= alpha on the live subspace      (connectivity LMI)
              secant distance coupling + minimum distance (acting layer)
              Euclidean-realizability of the distances    (EDM condition)
              pinned positions (other layer, spoofed and DoS'd robots)
              optional per-coordinate trust region

where L_lin linearizes each pair weight at the current state:
w_lin = w(k) + grad_w|_k . (x_ij(k+1) - x_ij(k)). Attacked pairs (jammed
links, links of DoS'd robots) contribute neither weight nor gradient.

Two exact reformulations keep the program strictly feasible in the interior
sense required by interior-point solvers (both are equivalences, not
relaxations; see the algebra below):

1. The connectivity LMI L_lin(x) - alpha C >= 0 is always singular along the
   all-ones direction (both sides annihilate it), so it is imposed as
   Q^T L_lin(x) Q >= alpha I with Q an orthonormal basis of the subspace
   orthogonal to the all-ones vector of the LIVE robots (DoS'd robots are
   excluded from the subspace, which makes alpha tight at the surviving
   subnetwork's connectivity instead of degenerating to 0).

2. The secant equalities pin each acting-layer Z entry to an affine function
   of positions: Z_ij(k+1) = 2 x_ij(k+1).x_ij(k) - ||x_ij(k)||^2, which
   equals ||x_ij(k+1)||^2 - ||x_ij(k+1) - x_ij(k)||^2, so Z underestimates
   the true squared distance and Z >= d implies the true constraint. Writing
   the centered Z Gram in a basis T + R of span(centered current positions)
   and its complement shows the R-R block of -Q_a^T Z Q_a is identically
   zero; positive semidefiniteness of a block matrix with zero diagonal
   block forces the mixed T-R block to zero, which is the linear condition
   R^T Q_a^T U = 0 on next positions U, leaving an r x r PSD block
   T^T B T with B = 2 (U~ P~^T + P~ U~^T - P~ P~^T), U~ = Q_a^T U,
   P~ = Q_a^T P. The reduced form has interior points (the full matrix form
   touches the PSD boundary everywhere, since any realization is limited to
   rank <= 3), and cross-layer Z entries drop out entirely because two point
   sets with valid distance blocks can always be embedded in orthogonal
   subspaces; the reported Z matrix is completed that way after the solve.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .conic import (
    RESIDUAL_TOLERANCE,
    BackendSolution,
    ConicProgram,
    ProgramBuilder,
    Residuals,
    solve_program,
)
from .errors import InvalidSpec, NumericalTrouble, SubproblemInfeasible
from .network import LayeredConfiguration, link_weight, link_weight_gradient
from .spectral import ones_complement_basis

#: singular values below this fraction of the largest are treated as rank-deficient
RANK_TOLERANCE = 1e-9

#: accepted states may violate the squared-distance floor by at most this much
DISTANCE_SLACK = 1e-9

#: solver settings used on the single tightened retry
RETRY_SETTINGS = {"tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10, "tol_feas": 1e-10, "max_iter": 200}


class OutcomeStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_TROUBLE = "numerical_trouble"


@dataclass(frozen=True)
class SubproblemSpec:
    """Everything needed to pose one player's step from the current state."""

    acting_player: int
    current_state: LayeredConfiguration
    frozen_robots: frozenset[int] = frozenset()  # spoofed: position pinned
    zeroed_links: frozenset[tuple[int, int]] = frozenset()  # jammed pairs
    removed_nodes: frozenset[int] = frozenset()  # DoS'd robots
    trust_radius: float | None = None
    lock_altitude: bool = False  # acting robots keep their z coordinate

    def __post_init__(self):
        n = self.current_state.n
        if self.acting_player not in (1, 2):
            raise InvalidSpec(f"acting_player must be 1 or 2, got {self.acting_player}")
        for idx in self.frozen_robots | self.removed_nodes:
            if not (0 <= idx < n):
                raise InvalidSpec(f"robot index {idx} out of range for n={n}")
        links = set()
        for (i, j) in self.zeroed_links:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise InvalidSpec(f"zeroed link ({i},{j}) invalid for n={n}")
            links.add((min(i, j), max(i, j)))
        object.__setattr__(self, "zeroed_links", frozenset(links))
        object.__setattr__(self, "frozen_robots", frozenset(int(i) for i in self.frozen_robots))
        object.__setattr__(self, "removed_nodes", frozenset(int(i) for i in self.removed_nodes))
        if self.trust_radius is not None and not self.trust_radius > 0:
            raise InvalidSpec(f"trust_radius must be positive or None, got {self.trust_radius}")

    @property
    def acting_indices(self) -> tuple[int, ...]:
        return tuple(self.current_state.layer_indices(self.acting_player))

    @property
    def acting_pairs(self) -> tuple[tuple[int, int], ...]:
        idx = self.acting_indices
        return tuple((idx[a], idx[b]) for a in range(len(idx)) for b in range(a + 1, len(idx)))

    @property
    def pinned_robots(self) -> frozenset[int]:
        other = set(range(self.current_state.n)) - set(self.acting_indices)
        return frozenset(other | set(self.frozen_robots) | set(self.removed_nodes))

    def with_trust_radius(self, radius: float | None) -> "SubproblemSpec":
        return SubproblemSpec(
            acting_player=self.acting_player,
            current_state=self.current_state,
            frozen_robots=self.frozen_robots,
            zeroed_links=self.zeroed_links,
            removed_nodes=self.removed_nodes,
            trust_radius=radius,
            lock_altitude=self.lock_altitude,
        )


@dataclass(frozen=True)
class SolveOutcome:
    status: OutcomeStatus
    next_positions: np.ndarray | None  # all robots, (n, 3); pinned rows unchanged
    epigraph_alpha: float | None
    z_matrix: np.ndarray | None  # full n x n squared-distance matrix
    iterations: int
    residuals: Residuals | None
    backend_status: str
    retried: bool = False


@dataclass(frozen=True)
class StepResult:
    configuration: LayeredConfiguration
    accepted: bool  # False means the null step (current state kept)
    backtracks: int
    outcomes: tuple[SolveOutcome, ...]
    lambda2_before: float
    lambda2_after: float


def default_trust_radius(cfg: LayeredConfiguration, player: int) -> float:
    model = cfg.model_inter1 if player == 1 else cfg.model_inter2
    return (model.rho2 - model.rho1) / 4.0


def _pair_terms(spec: SubproblemSpec):
    """(i, j, w0, gradient) for every pair contributing to the linearized Laplacian."""
    cfg = spec.current_state
    pos = cfg.positions
    out = []
    for i in range(cfg.n):
        for j in range(i + 1, cfg.n):
            if (i, j) in spec.zeroed_links or i in spec.removed_nodes or j in spec.removed_nodes:
                continue
            model = cfg.model_for(i, j)
            d = float(np.linalg.norm(pos[i] - pos[j]))
            if d < 1e-12:
                # coincident robots sit deep in the unit-weight zone; constant there
                out.append((i, j, 1.0, np.zeros(3)))
                continue
            w0 = link_weight(model, d)
            if model.rho1 < d < model.rho2:
                g = link_weight_gradient(model, pos[i], pos[j])
            else:
                g = np.zeros(3)
            if w0 == 0.0 and not g.any():
                continue
            out.append((i, j, w0, g))
    return out


def build_player_subproblem(spec: SubproblemSpec) -> ConicProgram:
    """Assemble the acting player's step as a self-contained conic program.

    Variable blocks, in order: "alpha" (1), "positions" (3n, all robots
    row-major), "zdist" (one squared-distance variable per acting-layer
    pair in lexicographic order).
    """
    cfg = spec.current_state
    n = cfg.n
    pos = cfg.positions
    acting = spec.acting_indices
    pairs = spec.acting_pairs
    pinned = spec.pinned_robots

    b = ProgramBuilder()
    sl_alpha = b.add_block("alpha", 1)
    sl_pos = b.add_block("positions", 3 * n)
    sl_z = b.add_block("zdist", len(pairs))

    def pvar(robot: int, coord: int) -> int:
        return sl_pos.start + 3 * robot + coord

    # pinned positions: the other layer, spoofed robots, DoS'd robots
    for r in sorted(pinned):
        for c in range(3):
            row = b.row()
            row[pvar(r, c)] = 1.0
            b.add_eq(row, pos[r, c])
    # altitude lock for the remaining acting robots
    if spec.lock_altitude:
        for r in acting:
            if r in pinned:
                continue
            row = b.row()
            row[pvar(r, 2)] = 1.0
            b.add_eq(row, pos[r, 2])

    # secant coupling: 2 x_ij(k+1).x_ij(k) = Z_ij(k+1) + ||x_ij(k)||^2
    dmin = cfg.d1 if spec.acting_player == 1 else cfg.d2
    for pidx, (i, j) in enumerate(pairs):
        xk = pos[i] - pos[j]
        row = b.row()
        for c in range(3):
            row[pvar(i, c)] += 2.0 * xk[c]
            row[pvar(j, c)] -= 2.0 * xk[c]
        row[sl_z.start + pidx] = -1.0
        b.add_eq(row, float(xk @ xk))
        # minimum squared distance inside the acting layer
        zrow = b.row()
        zrow[sl_z.start + pidx] = 1.0
        b.add_ineq_ge(zrow, dmin)

    # EDM condition, facially reduced (see module docstring)
    na = len(acting)
    if na >= 2:
        Qa = ones_complement_basis(na)
        Pt = Qa.T @ pos[list(acting)]
        U_, sv, _ = np.linalg.svd(Pt, full_matrices=True)
        r = int(np.sum(sv > RANK_TOLERANCE * max(sv[0], 1e-300)))
        T, R = U_[:, :r], U_[:, r:]
        QaT = Qa.T  # rows index the reduced space, columns the acting robots
        # linear part: R^T Q_a^T U = 0, one row per (complement direction, coordinate)
        RQ = R.T @ QaT
        for rr in range(RQ.shape[0]):
            for c in range(3):
                row = b.row()
                for a_local, a_robot in enumerate(acting):
                    row[pvar(a_robot, c)] = RQ[rr, a_local]
                b.add_eq(row, 0.0)
        if r >= 1:
            Tq = T.T @ QaT      # r x na, maps robot coefficients into the T basis
            Tp = T.T @ Pt       # r x 3
            const = -2.0 * (Tp @ Tp.T)  # equals -2 T^T P~ P~^T T
            terms: dict[int, np.ndarray] = {}
            for a_local, a_robot in enumerate(acting):
                for c in range(3):
                    F = 2.0 * (np.outer(Tq[:, a_local], Tp[:, c]) + np.outer(Tp[:, c], Tq[:, a_local]))
                    terms[pvar(a_robot, c)] = F
            b.add_psd(r, const, terms)

    # connectivity LMI on the live subspace: Q^T L_lin(x) Q - alpha I >= 0
    Qs = ones_complement_basis(n, spec.removed_nodes)
    m = Qs.shape[1]
    lmi_const = np.zeros((m, m))
    lmi_terms: dict[int, np.ndarray] = {sl_alpha.start: -np.eye(m)}
    for (i, j, w0, g) in _pair_terms(spec):
        e = np.zeros(n)
        e[i], e[j] = 1.0, -1.0
        Eq = np.outer(Qs.T @ e, Qs.T @ e)
        xk = pos[i] - pos[j]
        lmi_const += (w0 - float(g @ xk)) * Eq
        for c in range(3):
            if g[c] == 0.0:
                continue
            for robot, sign in ((i, 1.0), (j, -1.0)):
                k = pvar(robot, c)
                cur = lmi_terms.get(k)
                F = sign * g[c] * Eq
                lmi_terms[k] = F if cur is None else cur + F
    b.add_psd(m, lmi_const, lmi_terms)

    # trust region, per coordinate, acting robots that are free to move
    if spec.trust_radius is not None:
        tr = spec.trust_radius
        for rbt in acting:
            if rbt in pinned:
                continue
            for c in range(3):
                row = b.row()
                row[pvar(rbt, c)] = 1.0
                b.add_ineq_ge(row, pos[rbt, c] - tr)       # x >= x_k - tr
                b.add_ineq_ge(-row, -(pos[rbt, c] + tr))   # -x >= -(x_k + tr)

    obj = b.row()
    obj[sl_alpha.start] = 1.0
    b.set_objective_max(obj)
    return b.build()


def stay_put_candidate(spec: SubproblemSpec, program: ConicProgram) -> np.ndarray:
    """The always-feasible candidate: keep positions, Z = current squared distances.

    The epigraph value is the largest alpha the connectivity LMI admits at the
    current positions, i.e. the live subnetwork's linearized (= exact, at zero
    displacement) algebraic connectivity.
    """
    x = np.zeros(program.total_size)
    pos = spec.current_state.positions
    x[program.slice_of("positions")] = pos.reshape(-1)
    zsl = program.slice_of("zdist")
    for pidx, (i, j) in enumerate(spec.acting_pairs):
        x[zsl.start + pidx] = float(np.sum((pos[i] - pos[j]) ** 2))
    conn = program.psd_blocks[-1]
    x[program.slice_of("alpha")] = 0.0
    x[program.slice_of("alpha")] = float(np.linalg.eigvalsh(conn.evaluate(x))[0])
    return x


def linearized_connectivity(spec: SubproblemSpec, positions: np.ndarray) -> float:
    """lambda2 of the linearized Laplacian at given positions, live subspace."""
    cfg = spec.current_state
    n = cfg.n
    cur = cfg.positions
    L = np.zeros((n, n))
    for (i, j, w0, g) in _pair_terms(spec):
        w = w0 + float(g @ ((positions[i] - positions[j]) - (cur[i] - cur[j])))
        L[i, j] -= w
        L[j, i] -= w
        L[i, i] += w
        L[j, j] += w
    Qs = ones_complement_basis(n, spec.removed_nodes)
    return float(np.linalg.eigvalsh(Qs.T @ L @ Qs)[0])


def effective_connectivity(
    cfg: LayeredConfiguration,
    zeroed_links: frozenset[tuple[int, int]] | set[tuple[int, int]] = frozenset(),
    removed_nodes: frozenset[int] | set[int] = frozenset(),
) -> float:
    """Exact lambda2 restricted to surviving robots (equals global lambda2
    when nothing is removed; the meaningful connectivity during DoS)."""
    from .network import assemble_global_graph
    from .spectral import build_laplacian

    g = assemble_global_graph(cfg, zeroed_links=zeroed_links, removed_nodes=removed_nodes)
    L = build_laplacian(g)
    Qs = ones_complement_basis(cfg.n, removed_nodes)
    return float(np.linalg.eigvalsh(Qs.T @ L.entries @ Qs)[0])


def _completed_z(spec: SubproblemSpec, positions: np.ndarray, z_acting: np.ndarray) -> np.ndarray:
    """Full n x n squared-distance matrix: solved acting block, exact frozen
    block, cross block completed by the orthogonal-embedding construction."""
    cfg = spec.current_state
    n = cfg.n
    acting = list(spec.acting_indices)
    others = [i for i in range(n) if i not in spec.acting_indices]
    Z = np.zeros((n, n))
    for pidx, (i, j) in enumerate(spec.acting_pairs):
        Z[i, j] = Z[j, i] = z_acting[pidx]
    pos = cfg.positions
    for a in range(len(others)):
        for bidx in range(a + 1, len(others)):
            i, j = others[a], others[bidx]
            Z[i, j] = Z[j, i] = float(np.sum((pos[i] - pos[j]) ** 2))
    if acting and others:
        # embed acting robots from their solved Gram, others from positions,
        # in orthogonal subspaces; cross distances are then norm sums
        na = len(acting)
        Za = Z[np.ix_(acting, acting)]
        C = np.eye(na) - np.ones((na, na)) / na
        G = -C @ Za @ C / 2.0
        vals, vecs = np.linalg.eigh((G + G.T) / 2.0)
        vals = np.clip(vals, 0.0, None)
        acting_sq = np.diag(vecs @ np.diag(vals) @ vecs.T)
        centered = pos[others] - pos[others].mean(axis=0)
        other_sq = np.sum(centered**2, axis=1)
        for a_local, i in enumerate(acting):
            for o_local, j in enumerate(others):
                Z[i, j] = Z[j, i] = float(acting_sq[a_local] + other_sq[o_local])
    return Z


def _classify(program: ConicProgram, sol: BackendSolution) -> tuple[OutcomeStatus, Residuals | None]:
    if sol.status in ("infeasible", "infeasible_inaccurate"):
        return OutcomeStatus.INFEASIBLE, None
    if sol.x is None:
        return OutcomeStatus.NUMERICAL_TROUBLE, None
    res = program.residuals(sol.x)
    if sol.status in ("optimal", "optimal_inaccurate") and res.within(RESIDUAL_TOLERANCE):
        return OutcomeStatus.OPTIMAL, res
    return OutcomeStatus.NUMERICAL_TROUBLE, res


def solve_subproblem(
    program: ConicProgram,
    spec: SubproblemSpec,
    settings: dict | None = None,
    monitor=None,
) -> SolveOutcome:
    """Solve and verify one step program.

    Optimal is only reported when the backend succeeded AND the solution
    passes the independent residual check at RESIDUAL_TOLERANCE. On a
    residual or accuracy failure the solve is retried once with tightened
    settings before surfacing NumericalTrouble.

    monitor, when given, is called as monitor(spec, program, outcome) with
    every outcome before it is returned; it observes, it cannot intervene.
    """
    tried = []
    try:
        tried.append(solve_program(program, settings))
    except NumericalTrouble:
        tried.append(None)
    status, res = (OutcomeStatus.NUMERICAL_TROUBLE, None) if tried[0] is None else _classify(program, tried[0])
    retried = False
    if status is OutcomeStatus.NUMERICAL_TROUBLE:
        retried = True
        retry_settings = dict(RETRY_SETTINGS)
        retry_settings.update(settings or {})
        try:
            tried.append(solve_program(program, retry_settings))
            status, res = _classify(program, tried[-1])
        except NumericalTrouble:
            tried.append(None)
            status, res = OutcomeStatus.NUMERICAL_TROUBLE, None
    sol = tried[-1] if tried[-1] is not None else (tried[0] if tried[0] is not None else None)

    if status is not OutcomeStatus.OPTIMAL or sol is None or sol.x is None:
        out = SolveOutcome(
            status=status,
            next_positions=None,
            epigraph_alpha=None,
            z_matrix=None,
            iterations=0 if sol is None else sol.iterations,
            residuals=res,
            backend_status="backend_exception" if sol is None else sol.status,
            retried=retried,
        )
    else:
        x = sol.x
        positions = x[program.slice_of("positions")].reshape(spec.current_state.n, 3).copy()
        # pinned rows are equality-constrained; snap off the residual dust so
        # frozen robots are bitwise stationary across steps
        for rbt in spec.pinned_robots:
            positions[rbt] = spec.current_state.positions[rbt]
        z_acting = x[program.slice_of("zdist")]
        out = SolveOutcome(
            status=OutcomeStatus.OPTIMAL,
            next_positions=positions,
            epigraph_alpha=float(x[program.slice_of("alpha")][0]),
            z_matrix=_completed_z(spec, positions, z_acting),
            iterations=sol.iterations,
            residuals=res,
            backend_status=sol.status,
            retried=retried,
        )
    if monitor is not None:
        monitor(spec, program, out)
    return out


def accept_step(
    spec: SubproblemSpec,
    outcome: SolveOutcome,
    backtrack_tolerance: float = 1e-6,
    max_backtracks: int = 6,
    settings: dict | None = None,
    monitor=None,
) -> StepResult:
    """Safeguarded acceptance of a solved proposal.

    The proposal is accepted when the exact (non-linearized) connectivity of
    the live network has not dropped more than backtrack_tolerance below the
    pre-step value AND the acting layer's true squared distances respect the
    floor (they always do up to solver residuals, by the secant
    underestimate; the explicit check keeps accepted states valid to
    DISTANCE_SLACK by induction). Otherwise the trust radius is halved and
    the subproblem re-solved, up to max_backtracks times; the final fallback
    keeps the current state (null step).
    """
    cfg = spec.current_state
    before = effective_connectivity(cfg, spec.zeroed_links, spec.removed_nodes)
    outcomes = [outcome]
    cur_spec = spec
    tries = 0
    while True:
        oc = outcomes[-1]
        if oc.status is OutcomeStatus.INFEASIBLE:
            raise SubproblemInfeasible(
                f"player {spec.acting_player} subproblem infeasible; the stay-put candidate "
                "is feasible from any valid state, so the current state is corrupted "
                f"(min-distance violations: {cfg.min_distance_violations()})"
            )
        if oc.status is OutcomeStatus.OPTIMAL:
            candidate = cfg.with_positions(oc.next_positions)
            after = effective_connectivity(candidate, spec.zeroed_links, spec.removed_nodes)
            safe = not candidate.min_distance_violations(slack=DISTANCE_SLACK)
            if after >= before - backtrack_tolerance and safe:
                return StepResult(
                    configuration=candidate,
                    accepted=True,
                    backtracks=tries,
                    outcomes=tuple(outcomes),
                    lambda2_before=before,
                    lambda2_after=after,
                )
        if tries >= max_backtracks or cur_spec.trust_radius is None:
            return StepResult(
                configuration=cfg,
                accepted=False,
                backtracks=tries,
                outcomes=tuple(outcomes),
                lambda2_before=before,
                lambda2_after=before,
            )
        tries += 1
        cur_spec = cur_spec.with_trust_radius(cur_spec.trust_radius / 2.0)
        program = build_player_subproblem(cur_spec)
        outcomes.append(solve_subproblem(program, cur_spec, settings, monitor))
