"""Weighted-graph spectral machinery.

The algebraic connectivity of a weighted graph is the second-smallest
eigenvalue of its Laplacian L = D - A. Because the all-ones vector is always
in the kernel of L, lambda2 is computed here by deflation: project L onto an
orthonormal basis Q of the subspace orthogonal to the all-ones vector and
take the smallest eigenvalue of Q^T L Q. This is exact for connected and
disconnected graphs alike (lambda2 = 0 iff the graph is disconnected) and
the associated eigenvector Q v is a genuine eigenvector of L because L maps
the complement of the ones vector into itself.

Euclidean distance matrix (EDM) membership uses the classical centering
test: a hollow symmetric D is an EDM iff -C D C is positive semidefinite,
where C = I - (1/n) 11^T.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .errors import (
    NoSuchEdge,
    NoSuchNode,
    NumericalFailure,
    ShapeMismatch,
)

#: minimum eigenvalue accepted as "positive semidefinite" for float matrices
PSD_TOLERANCE = -1e-9

#: entries smaller than this count as zero when canonicalizing eigenvector signs
SIGN_EPS = 1e-12


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph on nodes 0..node_count-1.

    Edges are stored once with i < j; symmetry is implicit. Weights live in
    [0, 1], the range of the communication-strength law.
    """

    node_count: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if self.node_count < 1:
            raise ShapeMismatch(f"node_count must be >= 1, got {self.node_count}")
        seen = set()
        for (i, j, w) in self.edges:
            if i == j:
                raise ShapeMismatch(f"self-loop on node {i}")
            if not (0 <= i < j < self.node_count):
                raise ShapeMismatch(f"edge ({i},{j}) out of order or range for n={self.node_count}")
            if (i, j) in seen:
                raise ShapeMismatch(f"duplicate edge ({i},{j})")
            if not (0.0 <= w <= 1.0):
                raise ShapeMismatch(f"weight {w} outside [0,1] on edge ({i},{j})")
            seen.add((i, j))
        object.__setattr__(self, "edges", tuple((int(i), int(j), float(w)) for i, j, w in self.edges))

    def weight_of(self, i: int, j: int) -> float:
        """Weight of edge (i, j) in either order; 0.0 when absent."""
        if i > j:
            i, j = j, i
        for (a, b, w) in self.edges:
            if (a, b) == (i, j):
                return w
        return 0.0

    def weighted_degree(self, i: int) -> float:
        if not (0 <= i < self.node_count):
            raise NoSuchNode(f"node {i} not in graph of size {self.node_count}")
        return sum(w for (a, b, w) in self.edges if i in (a, b))


@dataclass(frozen=True)
class LaplacianMatrix:
    """Symmetric PSD matrix with zero row sums; wraps a read-only array."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeMismatch(f"Laplacian must be square, got shape {m.shape}")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ShapeMismatch("Laplacian must be symmetric")
        m = np.ascontiguousarray(m)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SpectralResult:
    lambda2: float
    fiedler: np.ndarray
    full_spectrum_available: bool = True
    spectrum: np.ndarray = field(default=None, repr=False)


def build_laplacian(g: WeightedGraph) -> LaplacianMatrix:
    """L_ii = sum of incident weights, L_ij = -w_ij for edges, 0 otherwise."""
    L = np.zeros((g.node_count, g.node_count))
    for (i, j, w) in g.edges:
        L[i, j] -= w
        L[j, i] -= w
        L[i, i] += w
        L[j, j] += w
    return LaplacianMatrix(L)


def ones_complement_basis(n: int, excluded: frozenset[int] | set[int] = frozenset()) -> np.ndarray:
    """Orthonormal basis of {v : v_e = 0 for e in excluded, v . 1_rest = 0}.

    Returns an n x (n_live - 1) matrix with orthonormal columns, where n_live
    is the number of non-excluded indices. Used both for lambda2 deflation
    (excluded empty) and for restricting the connectivity objective to the
    surviving robots during a denial-of-service attack.
    """
    live = [i for i in range(n) if i not in excluded]
    n_live = len(live)
    if n_live < 2:
        raise ShapeMismatch(f"need at least 2 live nodes, got {n_live}")
    ones = np.ones(n_live) / np.sqrt(n_live)
    # QR of [1/sqrt(n) | I] yields a deterministic basis whose first column is 1
    Qs = np.linalg.qr(np.c_[ones, np.eye(n_live)[:, : n_live - 1]])[0][:, 1:]
    lift = np.zeros((n, n_live))
    for col, idx in enumerate(live):
        lift[idx, col] = 1.0
    return lift @ Qs


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    nz = np.nonzero(np.abs(v) > SIGN_EPS)[0]
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def algebraic_connectivity(L: LaplacianMatrix) -> SpectralResult:
    """lambda2 and a unit Fiedler vector orthogonal to the all-ones vector.

    Ties in a degenerate lambda2 eigenspace are broken deterministically by
    the eigensolver's ordering plus a sign canonicalization (first entry
    larger than SIGN_EPS in magnitude is made positive).
    """
    n = L.n
    if n < 2:
        raise ShapeMismatch("algebraic connectivity needs at least 2 nodes")
    Q = ones_complement_basis(n)
    try:
        vals, vecs = np.linalg.eigh(Q.T @ L.entries @ Q)
        spectrum = np.sort(np.concatenate([[0.0], vals]))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh rarely fails
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    lam2 = float(vals[0])
    fiedler = _canonical_sign(Q @ vecs[:, 0])
    spectrum.setflags(write=False)
    fiedler.setflags(write=False)
    return SpectralResult(lambda2=lam2, fiedler=fiedler, full_spectrum_available=True, spectrum=spectrum)


def edm_validity(D: np.ndarray, tol: float = PSD_TOLERANCE) -> bool:
    """True iff the hollow symmetric matrix D is a Euclidean distance matrix."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ShapeMismatch(f"EDM test needs a square matrix, got {D.shape}")
    if not np.allclose(D, D.T, atol=1e-9):
        raise ShapeMismatch("EDM test needs a symmetric matrix")
    if not np.allclose(np.diag(D), 0.0, atol=1e-9):
        raise ShapeMismatch("EDM test needs a hollow matrix (zero diagonal)")
    n = D.shape[0]
    C = np.eye(n) - np.ones((n, n)) / n
    try:
        smallest = float(np.linalg.eigvalsh(-C @ D @ C)[0])
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    return smallest >= tol


def perturbed_laplacian_link(L: LaplacianMatrix, i: int, j: int, w_ij: float) -> LaplacianMatrix:
    """Laplacian with link (i, j) of weight w_ij removed (rank-one update)."""
    n = L.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise NoSuchEdge(f"invalid pair ({i},{j}) for n={n}")
    actual = -L.entries[i, j]
    if actual <= 0.0 or abs(actual - w_ij) > 1e-9:
        raise NoSuchEdge(f"({i},{j}) has weight {actual}, not an edge of weight {w_ij}")
    e = np.zeros(n)
    e[i], e[j] = 1.0, -1.0
    return LaplacianMatrix(L.entries - w_ij * np.outer(e, e))


def perturbed_laplacian_node(L: LaplacianMatrix, i: int, incident_weights: dict[int, float] | None = None) -> LaplacianMatrix:
    """Laplacian with every link incident to node i removed.

    The matrix keeps its dimension; row and column i become zero, so the node
    remains as an isolated vertex and lambda2 of the result is 0. Incident
    weights default to the ones read off row i.
    """
    n = L.n
    if not (0 <= i < n):
        raise NoSuchNode(f"node {i} not in Laplacian of size {n}")
    if incident_weights is None:
        incident_weights = {j: -L.entries[i, j] for j in range(n) if j != i and L.entries[i, j] != 0.0}
    out = L.entries.copy()
    for j, w in incident_weights.items():
        if not (0 <= j < n) or j == i:
            raise NoSuchNode(f"neighbor {j} invalid for node {i}")
        e = np.zeros(n)
        e[i], e[j] = 1.0, -1.0
        out -= w * np.outer(e, e)
    return LaplacianMatrix(out)


def connected_components(g: WeightedGraph, weight_floor: float = 0.0) -> list[list[int]]:
    """Connected components (sorted lists of nodes), ignoring edges <= weight_floor."""
    rows, cols = [], []
    for (i, j, w) in g.edges:
        if w > weight_floor:
            rows.append(i)
            cols.append(j)
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.node_count, g.node_count))
    count, labels = csgraph.connected_components(adj, directed=False)
    comps = [[] for _ in range(count)]
    for node, lab in enumerate(labels):
        comps[lab].append(node)
    return [sorted(c) for c in comps]


# ---------------------------------------------------------------------------
# graph import/export: edge-list text `i j w` and JSON {"n":…, "edges": [...]}

def graph_to_text(g: WeightedGraph) -> str:
    lines = [f"{i} {j} {w!r}" for (i, j, w) in g.edges]
    return "\n".join(lines) + ("\n" if lines else "")


def graph_from_text(text: str) -> WeightedGraph:
    edges = []
    max_node = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ShapeMismatch(f"line {lineno}: expected 'i j w', got {raw!r}")
        i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        if i > j:
            i, j = j, i
        edges.append((i, j, w))
        max_node = max(max_node, i, j)
    return WeightedGraph(node_count=max_node + 1, edges=tuple(edges))


def graph_to_json_dict(g: WeightedGraph) -> dict:
    return {"n": g.node_count, "edges": [[i, j, w] for (i, j, w) in g.edges]}


def graph_from_json_dict(obj: dict) -> WeightedGraph:
    edges = []
    for e in obj["edges"]:
        i, j, w = int(e[0]), int(e[1]), float(e[2])
        if i > j:
            i, j = j, i
        edges.append((i, j, w))
    return WeightedGraph(node_count=int(obj["n"]), edges=tuple(edges))


def load_graph(path: str) -> WeightedGraph:
    """Load a graph from a .json object file or an edge-list text file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return graph_from_json_dict(json.loads(text))
    return graph_from_text(text)


def save_graph(path: str, g: WeightedGraph):
    with open(path, "w", encoding="utf-8") as fh:
        if path.endswith(".json"):
            json.dump(graph_to_json_dict(g), fh, indent=2)
            fh.write("\n")
        else:
            fh.write(graph_to_text(g))
