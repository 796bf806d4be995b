"""Adversarial events and worst-case target selection.

Three attack classes against a layered network:

* spoof: the targeted robot can no longer move (its position is pinned) but
  keeps communicating, so the graph is instantaneously unchanged;
* jam: one link's weight is forced to zero while the attack lasts;
* dos: one robot is cut off entirely (all incident weights zero).

Worst-case targets come from first-order spectral scores built on the
Fiedler vector u of the current Laplacian: a link scores w_ij (u_i - u_j)^2,
a node scores the sum of its incident link scores, and lambda2 minus the
score upper-bounds the post-attack connectivity (eigenvalue variational
argument: u stays a unit-norm candidate for the perturbed Laplacian). The
selectors are argmaxes of these scores, which need not coincide with the
argmin of the exact post-attack lambda2; reports carry both so the gap is
visible.

Scoped selection models attackers with partial knowledge: a layer-scoped
attacker sees only that layer's induced sub-network and computes scores
from its local Fiedler vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyScope, InvalidSpec, NoSuchEdge, NoSuchNode
from .network import LayeredConfiguration, assemble_global_graph
from .spectral import (
    SpectralResult,
    WeightedGraph,
    algebraic_connectivity,
    build_laplacian,
    connected_components,
)

import enum

#: eigenvalues within this of lambda2 are treated as one eigenspace;
#: scores within this of the best are treated as tied during selection
DEGENERACY_TOLERANCE = 1e-8


def _pick(scored):
    """Deterministic argmax over (score, key) pairs.

    Scores computed from floating-point eigenvectors carry rounding noise, so
    an exact tie (two links scoring 0.5 on paper) lands within epsilon, not
    at equality. Anything within DEGENERACY_TOLERANCE of the best counts as
    tied and the smallest key wins.
    """
    best = max(s for s, _ in scored)
    return min(k for s, k in scored if s >= best - DEGENERACY_TOLERANCE)


class AttackKind(enum.Enum):
    SPOOF = "spoof"
    JAM = "jam"
    DOS = "dos"


class AttackScope(enum.Enum):
    GLOBAL = "global"
    LAYER1_ONLY = "layer1"
    LAYER2_ONLY = "layer2"


@dataclass(frozen=True)
class AttackEvent:
    """One scripted attack: what, whom, and when.

    target None means "worst case, chosen when the attack starts" via the
    matching selector on the then-current network.
    """

    kind: AttackKind
    target: int | tuple[int, int] | None
    start_step: int
    duration: int
    scope: AttackScope = AttackScope.GLOBAL

    def __post_init__(self):
        if self.start_step < 0:
            raise InvalidSpec(f"start_step must be nonnegative, got {self.start_step}")
        if self.duration < 1:
            raise InvalidSpec(f"duration must be at least 1, got {self.duration}")
        t = self.target
        if t is not None:
            if self.kind is AttackKind.JAM:
                if not (isinstance(t, (tuple, list)) and len(t) == 2):
                    raise InvalidSpec(f"jam target must be a link pair, got {t!r}")
                i, j = int(t[0]), int(t[1])
                if i == j:
                    raise InvalidSpec("jam target endpoints must differ")
                object.__setattr__(self, "target", (min(i, j), max(i, j)))
            else:
                if not isinstance(t, (int, np.integer)):
                    raise InvalidSpec(f"{self.kind.value} target must be a robot index, got {t!r}")
                object.__setattr__(self, "target", int(t))

    def active_at(self, step: int) -> bool:
        return self.start_step <= step < self.start_step + self.duration

    @property
    def last_step(self) -> int:
        return self.start_step + self.duration - 1


def _scope_nodes(g: WeightedGraph, scope: AttackScope, layer_split: int | None) -> list[int]:
    if scope is AttackScope.GLOBAL:
        return list(range(g.node_count))
    if layer_split is None:
        raise InvalidSpec(f"scope {scope.value} needs layer_split (the first layer's size)")
    if scope is AttackScope.LAYER1_ONLY:
        nodes = list(range(min(layer_split, g.node_count)))
    else:
        nodes = list(range(layer_split, g.node_count))
    return nodes


def _induced(g: WeightedGraph, nodes: list[int]) -> tuple[WeightedGraph, list[int]]:
    keep = set(nodes)
    local = {glob: loc for loc, glob in enumerate(nodes)}
    edges = tuple(
        (local[i], local[j], w) for (i, j, w) in g.edges if i in keep and j in keep
    )
    return WeightedGraph(node_count=len(nodes), edges=edges), nodes


def _scoped_view(
    g: WeightedGraph,
    spectral: SpectralResult | None,
    scope: AttackScope,
    layer_split: int | None,
) -> tuple[WeightedGraph, np.ndarray, list[int]]:
    """(graph to score on, Fiedler vector for it, local->global node map).

    Layer scopes rebuild the spectral data on the induced sub-network: a
    partial-knowledge attacker only observes that layer.
    """
    nodes = _scope_nodes(g, scope, layer_split)
    if not nodes:
        raise EmptyScope(f"no robots within scope {scope.value}")
    if scope is AttackScope.GLOBAL:
        sub, mapping = g, list(range(g.node_count))
    else:
        sub, mapping = _induced(g, nodes)
    if scope is AttackScope.GLOBAL and spectral is not None:
        u = np.asarray(spectral.fiedler, dtype=float)
    else:
        if sub.node_count < 2:
            raise EmptyScope(f"scope {scope.value} holds fewer than two robots")
        u = algebraic_connectivity(build_laplacian(sub)).fiedler
    return sub, u, mapping


def link_score(g: WeightedGraph, u: np.ndarray, i: int, j: int) -> float:
    return g.weight_of(i, j) * float(u[i] - u[j]) ** 2


def node_score(g: WeightedGraph, u: np.ndarray, i: int) -> float:
    return sum(w * float(u[a] - u[b]) ** 2 for (a, b, w) in g.edges if i in (a, b))


def select_spoof_target(
    g: WeightedGraph,
    scope: AttackScope = AttackScope.GLOBAL,
    layer_split: int | None = None,
) -> int:
    """The robot with the largest weighted degree within scope (ties: lowest index)."""
    nodes = _scope_nodes(g, scope, layer_split)
    if not nodes:
        raise EmptyScope(f"no robots within scope {scope.value}")
    if scope is AttackScope.GLOBAL:
        degrees = [(g.weighted_degree(i), i) for i in nodes]
    else:
        sub, mapping = _induced(g, nodes)
        degrees = [(sub.weighted_degree(loc), mapping[loc]) for loc in range(sub.node_count)]
    return _pick(degrees)


def select_jam_target(
    g: WeightedGraph,
    spectral: SpectralResult | None = None,
    scope: AttackScope = AttackScope.GLOBAL,
    layer_split: int | None = None,
) -> tuple[int, int]:
    """The link maximizing w_ij (u_i - u_j)^2 within scope (ties: lexicographic)."""
    sub, u, mapping = _scoped_view(g, spectral, scope, layer_split)
    if not sub.edges:
        raise EmptyScope(f"no links within scope {scope.value}")
    scored = [
        (link_score(sub, u, i, j), (mapping[i], mapping[j])) for (i, j, _) in sub.edges
    ]
    return _pick(scored)


def select_dos_target(
    g: WeightedGraph,
    spectral: SpectralResult | None = None,
    scope: AttackScope = AttackScope.GLOBAL,
    layer_split: int | None = None,
) -> int:
    """The robot maximizing its incident link-score sum within scope (ties: lowest)."""
    sub, u, mapping = _scoped_view(g, spectral, scope, layer_split)
    scored = [(node_score(sub, u, loc), mapping[loc]) for loc in range(sub.node_count)]
    return _pick(scored)


def drop_bound_link(g: WeightedGraph, spectral: SpectralResult, i: int, j: int) -> float:
    """Upper bound on lambda2 after link (i, j) is removed: lambda2 - score.

    Reported raw; it can exceed the exact post-removal value by a lot but
    never sits below it (minus numerical dust).
    """
    a, b = min(i, j), max(i, j)
    if not any((p, q) == (a, b) for (p, q, _) in g.edges):
        raise NoSuchEdge(f"({i},{j}) is not a link of the graph")
    return spectral.lambda2 - link_score(g, np.asarray(spectral.fiedler, dtype=float), a, b)


def drop_bound_node(g: WeightedGraph, spectral: SpectralResult, i: int) -> float:
    """Upper bound on lambda2 after robot i is cut off. May be negative
    (then vacuous, since lambda2 >= 0); no clamping is applied."""
    if not (0 <= i < g.node_count):
        raise NoSuchNode(f"node {i} not in graph of size {g.node_count}")
    return spectral.lambda2 - node_score(g, np.asarray(spectral.fiedler, dtype=float), i)


@dataclass(frozen=True)
class AttackImpact:
    kind: AttackKind
    target: int | tuple[int, int]
    lambda2_before: float
    lambda2_after: float
    drop: float
    largest_component_lambda2: float | None = None  # dos only


def attack_impact(cfg: LayeredConfiguration, event: AttackEvent) -> AttackImpact:
    """Exact connectivity change when the event's attack is applied to cfg.

    Spoofing pins motion but leaves links intact, so its instantaneous drop
    is exactly zero. A dos isolates the robot inside the fixed-size network,
    so the global lambda2 after it is 0 whenever n >= 3; the largest
    remaining component's lambda2 is reported alongside to rank dos targets.
    """
    if event.target is None:
        raise InvalidSpec("attack_impact needs a concrete target; resolve it first")
    g0 = assemble_global_graph(cfg)
    before = algebraic_connectivity(build_laplacian(g0)).lambda2
    largest = None
    if event.kind is AttackKind.SPOOF:
        after = before
    elif event.kind is AttackKind.JAM:
        g1 = assemble_global_graph(cfg, zeroed_links={event.target})
        after = algebraic_connectivity(build_laplacian(g1)).lambda2
    else:
        g1 = assemble_global_graph(cfg, removed_nodes={event.target})
        after = algebraic_connectivity(build_laplacian(g1)).lambda2
        comps = connected_components(g1)
        big = max(comps, key=lambda c: (len(c), -c[0]))
        if len(big) >= 2:
            sub, _ = _induced(g1, big)
            largest = algebraic_connectivity(build_laplacian(sub)).lambda2
        else:
            largest = 0.0
    return AttackImpact(
        kind=event.kind,
        target=event.target,
        lambda2_before=before,
        lambda2_after=after,
        drop=before - after,
        largest_component_lambda2=largest,
    )


def resolve_target(
    cfg: LayeredConfiguration,
    kind: AttackKind,
    scope: AttackScope = AttackScope.GLOBAL,
) -> int | tuple[int, int]:
    """Worst-case target for the given attack on the current network."""
    g = assemble_global_graph(cfg)
    if kind is AttackKind.SPOOF:
        return select_spoof_target(g, scope, layer_split=cfg.n1)
    spectral = algebraic_connectivity(build_laplacian(g))
    if kind is AttackKind.JAM:
        return select_jam_target(g, spectral, scope, layer_split=cfg.n1)
    return select_dos_target(g, spectral, scope, layer_split=cfg.n1)


def fiedler_rotations(g: WeightedGraph, count: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Unit vectors drawn from the lambda2 eigenspace (seeded).

    When lambda2 is simple every draw is the Fiedler vector up to sign and
    scores are identical; under degeneracy the draws expose how much the
    score argmax depends on the eigenvector choice.
    """
    L = build_laplacian(g).entries
    n = g.node_count
    vals, vecs = np.linalg.eigh(L)
    lam2 = vals[1]
    space = vecs[:, np.abs(vals - lam2) <= DEGENERACY_TOLERANCE * max(1.0, abs(lam2))]
    # the all-ones direction can sit inside a degenerate eigenspace
    # (disconnected graph); project it out and re-orthonormalize
    ones = np.ones(n) / np.sqrt(n)
    space = space - np.outer(ones, ones @ space)
    q_basis, rdiag = np.linalg.qr(space)
    space = q_basis[:, np.abs(np.diag(rdiag)) > 1e-9]
    if space.shape[1] == 0:
        space = vecs[:, 1:2]
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        q = rng.normal(size=space.shape[1])
        q /= np.linalg.norm(q)
        out.append(space @ q)
    return out


def selection_sensitivity(
    g: WeightedGraph,
    kind: AttackKind,
    scope: AttackScope = AttackScope.GLOBAL,
    layer_split: int | None = None,
    rotations: int = 5,
    seed: int = 0,
) -> list[dict]:
    """Selected target under each eigenspace rotation (spoof never varies)."""
    if kind is AttackKind.SPOOF:
        t = select_spoof_target(g, scope, layer_split)
        return [{"rotation": k, "target": t} for k in range(rotations)]
    nodes = _scope_nodes(g, scope, layer_split)
    if not nodes:
        raise EmptyScope(f"no robots within scope {scope.value}")
    sub, mapping = (g, list(range(g.node_count))) if scope is AttackScope.GLOBAL else _induced(g, nodes)
    out = []
    for k, u in enumerate(fiedler_rotations(sub, count=rotations, seed=seed)):
        if kind is AttackKind.JAM:
            if not sub.edges:
                raise EmptyScope(f"no links within scope {scope.value}")
            scored = [(link_score(sub, u, i, j), (mapping[i], mapping[j])) for (i, j, _) in sub.edges]
            out.append({"rotation": k, "target": _pick(scored)})
        else:
            scored = [(node_score(sub, u, loc), mapping[loc]) for loc in range(sub.node_count)]
            out.append({"rotation": k, "target": _pick(scored)})
    return out


def attack_plan_report(
    cfg: LayeredConfiguration,
    kind: AttackKind,
    scope: AttackScope = AttackScope.GLOBAL,
    seed: int = 0,
) -> dict:
    """Everything an attacker (or a defender auditing one) wants to see:
    per-candidate scores, drop bounds, exact post-attack values, the
    selected target, and its sensitivity to Fiedler-vector rotation."""
    g = assemble_global_graph(cfg)
    spectral = algebraic_connectivity(build_laplacian(g))
    sub, u, mapping = _scoped_view(g, spectral, scope, cfg.n1)
    local_lambda2 = (
        spectral.lambda2
        if scope is AttackScope.GLOBAL
        else algebraic_connectivity(build_laplacian(sub)).lambda2
    )
    candidates = []
    if kind is AttackKind.JAM:
        if not sub.edges:
            raise EmptyScope(f"no links within scope {scope.value}")
        for (i, j, w) in sub.edges:
            gi, gj = mapping[i], mapping[j]
            s = link_score(sub, u, i, j)
            exact = attack_impact(cfg, AttackEvent(AttackKind.JAM, (gi, gj), 0, 1))
            candidates.append(
                {
                    "target": [gi, gj],
                    "weight": w,
                    "score": s,
                    "drop_bound": local_lambda2 - s,
                    "exact_lambda2_after": exact.lambda2_after,
                    "exact_drop": exact.drop,
                }
            )
        selected = select_jam_target(g, spectral, scope, layer_split=cfg.n1)
        selected_out: object = list(selected)
    elif kind is AttackKind.DOS:
        for loc in range(sub.node_count):
            gi = mapping[loc]
            s = node_score(sub, u, loc)
            exact = attack_impact(cfg, AttackEvent(AttackKind.DOS, gi, 0, 1))
            candidates.append(
                {
                    "target": gi,
                    "score": s,
                    "drop_bound": local_lambda2 - s,
                    "exact_lambda2_after": exact.lambda2_after,
                    "exact_drop": exact.drop,
                    "largest_component_lambda2": exact.largest_component_lambda2,
                }
            )
        selected = select_dos_target(g, spectral, scope, layer_split=cfg.n1)
        selected_out = selected
    elif kind is AttackKind.SPOOF:
        for loc in range(sub.node_count):
            gi = mapping[loc]
            candidates.append(
                {
                    "target": gi,
                    "score": sub.weighted_degree(loc),
                    "exact_lambda2_after": spectral.lambda2,
                    "exact_drop": 0.0,
                }
            )
        selected = select_spoof_target(g, scope, layer_split=cfg.n1)
        selected_out = selected
    else:  # pragma: no cover - enum is closed
        raise InvalidSpec(f"unknown attack kind {kind!r}")
    return {
        "kind": kind.value,
        "scope": scope.value,
        "lambda2": spectral.lambda2,
        "scope_lambda2": local_lambda2,
        "candidates": candidates,
        "selected": selected_out,
        "sensitivity": selection_sensitivity(
            g, kind, scope, layer_split=cfg.n1, rotations=5, seed=seed
        ),
    }
