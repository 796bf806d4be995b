"""Two-layer mobile robot network model.

Link strength between two robots depends only on their distance and the
class of the pair: Inter1 connects two layer-1 robots, Inter2 two layer-2
robots, and Intra connects robots in different layers. (The Inter/Intra
naming follows the convention that layer-internal links are "inter-robot"
links of that network; Intra links couple the two networks.) Each class has
its own (rho1, rho2, decay) parameters:

    weight(d) = 1                                   for d < rho1
              = exp(-decay (d - rho1)/(rho2 - rho1)) for rho1 <= d <= rho2
              = 0                                    for d > rho2

The law is continuous at rho1 and drops from exp(-decay) to 0 just past
rho2; that jump is intentional and tested. Robots are indexed globally:
layer 1 occupies 0..n1-1 and layer 2 occupies n1..n1+n2-1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistance, ShapeMismatch
from .spectral import (
    SpectralResult,
    WeightedGraph,
    algebraic_connectivity,
    build_laplacian,
)

#: pair weights below this threshold are omitted from assembled edge lists
EDGE_PRUNE_THRESHOLD = 1e-9


class LinkClass(enum.Enum):
    INTER1 = "inter1"  # both robots in layer 1
    INTER2 = "inter2"  # both robots in layer 2
    INTRA = "intra"    # one robot in each layer


@dataclass(frozen=True)
class WeightModel:
    rho1: float
    rho2: float
    decay_alpha: float

    def __post_init__(self):
        if not (self.rho1 > 0 and self.rho2 > 0 and self.decay_alpha > 0):
            raise ShapeMismatch("WeightModel parameters must be positive")
        if not self.rho1 < self.rho2:
            raise ShapeMismatch(f"need rho1 < rho2, got {self.rho1} >= {self.rho2}")


def link_weight(model: WeightModel, distance: float) -> float:
    if distance < 0:
        raise ShapeMismatch(f"distance must be nonnegative, got {distance}")
    if distance < model.rho1:
        return 1.0
    if distance <= model.rho2:
        return math.exp(-model.decay_alpha * (distance - model.rho1) / (model.rho2 - model.rho1))
    return 0.0


def link_weight_gradient(model: WeightModel, xi: np.ndarray, xj: np.ndarray) -> np.ndarray:
    """Gradient of link_weight with respect to x_ij = xi - xj.

    Zero outside the open interval (rho1, rho2); inside it the chain rule
    gives -(decay/(rho2-rho1)) * weight(d) * x_ij / d.
    """
    xij = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    d = float(np.linalg.norm(xij))
    if d < 1e-12:
        raise DegenerateDistance("coincident points have no distance gradient")
    if d <= model.rho1 or d >= model.rho2:
        return np.zeros(xij.shape)
    scale = -(model.decay_alpha / (model.rho2 - model.rho1)) * link_weight(model, d) / d
    return scale * xij


@dataclass(frozen=True)
class LayeredConfiguration:
    """Positions of both layers plus the weight models and distance floors.

    min-distance thresholds d1, d2 are SQUARED distances: an accepted state
    must satisfy ||x_i - x_j||^2 >= d1 for distinct robots of layer 1 and
    >= d2 within layer 2. The invariant applies to accepted game states;
    arbitrary intermediate proposals are allowed to violate it and are
    filtered by the acceptance logic.
    """

    layer1_positions: np.ndarray
    layer2_positions: np.ndarray
    model_inter1: WeightModel
    model_inter2: WeightModel
    model_intra: WeightModel
    d1: float
    d2: float

    def __post_init__(self):
        for name in ("layer1_positions", "layer2_positions"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ShapeMismatch(f"{name} must be (k, 3), got {arr.shape}")
            if arr.shape[0] < 1:
                raise ShapeMismatch(f"{name} needs at least one robot")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.d1 < 0 or self.d2 < 0:
            raise ShapeMismatch("minimum squared distances must be nonnegative")

    @property
    def n1(self) -> int:
        return self.layer1_positions.shape[0]

    @property
    def n2(self) -> int:
        return self.layer2_positions.shape[0]

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def positions(self) -> np.ndarray:
        """All robot positions stacked, layer 1 first. Shape (n, 3)."""
        return np.vstack([self.layer1_positions, self.layer2_positions])

    def layer_of(self, i: int) -> int:
        if not (0 <= i < self.n):
            raise ShapeMismatch(f"robot {i} out of range for n={self.n}")
        return 1 if i < self.n1 else 2

    def layer_indices(self, layer: int) -> range:
        if layer == 1:
            return range(0, self.n1)
        if layer == 2:
            return range(self.n1, self.n)
        raise ShapeMismatch(f"layer must be 1 or 2, got {layer}")

    def link_class(self, i: int, j: int) -> LinkClass:
        li, lj = self.layer_of(i), self.layer_of(j)
        if li == lj:
            return LinkClass.INTER1 if li == 1 else LinkClass.INTER2
        return LinkClass.INTRA

    def model_for(self, i: int, j: int) -> WeightModel:
        cls = self.link_class(i, j)
        if cls is LinkClass.INTER1:
            return self.model_inter1
        if cls is LinkClass.INTER2:
            return self.model_inter2
        return self.model_intra

    def min_distance_for(self, i: int, j: int) -> float | None:
        """Squared-distance floor for the pair, or None for cross-layer pairs."""
        cls = self.link_class(i, j)
        if cls is LinkClass.INTER1:
            return self.d1
        if cls is LinkClass.INTER2:
            return self.d2
        return None

    def with_positions(self, positions: np.ndarray) -> "LayeredConfiguration":
        positions = np.asarray(positions, dtype=float)
        if positions.shape != (self.n, 3):
            raise ShapeMismatch(f"expected positions of shape {(self.n, 3)}, got {positions.shape}")
        return LayeredConfiguration(
            layer1_positions=positions[: self.n1],
            layer2_positions=positions[self.n1:],
            model_inter1=self.model_inter1,
            model_inter2=self.model_inter2,
            model_intra=self.model_intra,
            d1=self.d1,
            d2=self.d2,
        )

    def min_distance_violations(self, slack: float = 1e-9) -> list[tuple[int, int, float]]:
        """Pairs violating the squared-distance floor by more than slack."""
        pos = self.positions
        out = []
        for layer, floor in ((1, self.d1), (2, self.d2)):
            idx = list(self.layer_indices(layer))
            for a in range(len(idx)):
                for b in range(a + 1, len(idx)):
                    i, j = idx[a], idx[b]
                    sq = float(np.sum((pos[i] - pos[j]) ** 2))
                    if sq < floor - slack:
                        out.append((i, j, sq))
        return out


def iter_pairs(n: int):
    for i in range(n):
        for j in range(i + 1, n):
            yield (i, j)


def assemble_global_graph(
    cfg: LayeredConfiguration,
    zeroed_links: frozenset[tuple[int, int]] | set[tuple[int, int]] = frozenset(),
    removed_nodes: frozenset[int] | set[int] = frozenset(),
) -> WeightedGraph:
    """Weighted graph over all robots from the per-class weight law.

    zeroed_links (jam) and removed_nodes (denial of service) force the
    affected weights to zero; pairs whose weight falls below
    EDGE_PRUNE_THRESHOLD are omitted from the edge list.
    """
    pos = cfg.positions
    zeroed = {(min(i, j), max(i, j)) for (i, j) in zeroed_links}
    edges = []
    for (i, j) in iter_pairs(cfg.n):
        if (i, j) in zeroed or i in removed_nodes or j in removed_nodes:
            continue
        d = float(np.linalg.norm(pos[i] - pos[j]))
        w = link_weight(cfg.model_for(i, j), d)
        if w >= EDGE_PRUNE_THRESHOLD:
            edges.append((i, j, w))
    return WeightedGraph(node_count=cfg.n, edges=tuple(edges))


def true_connectivity(
    cfg: LayeredConfiguration,
    zeroed_links: frozenset[tuple[int, int]] | set[tuple[int, int]] = frozenset(),
    removed_nodes: frozenset[int] | set[int] = frozenset(),
) -> SpectralResult:
    """Exact (non-linearized) algebraic connectivity of the global network."""
    g = assemble_global_graph(cfg, zeroed_links=zeroed_links, removed_nodes=removed_nodes)
    return algebraic_connectivity(build_laplacian(g))
