import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conngame import (
    LaplacianMatrix,
    NoSuchEdge,
    NoSuchNode,
    ShapeMismatch,
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
from conngame.spectral import graph_from_text, graph_to_text


def unit_path(n=3):
    return WeightedGraph(node_count=n, edges=tuple((i, i + 1, 1.0) for i in range(n - 1)))


def test_triangle_connectivity():
    g = WeightedGraph(3, ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)))
    s = algebraic_connectivity(build_laplacian(g))
    assert abs(s.lambda2 - 3.0) < 1e-12
    assert np.allclose(s.spectrum, [0.0, 3.0, 3.0], atol=1e-9)


def test_path_fiedler_vector():
    s = algebraic_connectivity(build_laplacian(unit_path()))
    assert abs(s.lambda2 - 1.0) < 1e-12
    r = 1.0 / np.sqrt(2.0)
    assert np.allclose(s.fiedler, [r, 0.0, -r], atol=1e-9)


def test_disconnected_graph_has_zero_lambda2():
    g = WeightedGraph(4, ((0, 1, 1.0), (2, 3, 1.0)))
    s = algebraic_connectivity(build_laplacian(g))
    assert abs(s.lambda2) < 1e-12
    assert abs(float(np.sum(s.fiedler))) < 1e-9


def test_single_edge_pair():
    g = WeightedGraph(2, ((0, 1, 0.7),))
    s = algebraic_connectivity(build_laplacian(g))
    # lambda2 of a single edge of weight w is 2w
    assert abs(s.lambda2 - 1.4) < 1e-12


def test_fiedler_is_unit_eigenvector(graph_factory):
    rng = np.random.default_rng(3)
    for _ in range(25):
        g = graph_factory(rng)
        L = build_laplacian(g)
        s = algebraic_connectivity(L)
        assert abs(float(np.linalg.norm(s.fiedler)) - 1.0) < 1e-9
        assert float(np.linalg.norm(L.entries @ s.fiedler - s.lambda2 * s.fiedler)) <= 1e-7
        rayleigh = float(s.fiedler @ L.entries @ s.fiedler)
        assert abs(rayleigh - s.lambda2) <= 1e-7


def test_lambda2_bounded_and_monotone_under_edge_addition(graph_factory):
    rng = np.random.default_rng(11)
    for _ in range(200):
        g = graph_factory(rng)
        lam = algebraic_connectivity(build_laplacian(g)).lambda2
        assert -1e-12 <= lam <= g.node_count + 1e-9
        present = {(i, j) for (i, j, _) in g.edges}
        absent = [
            (i, j)
            for i in range(g.node_count)
            for j in range(i + 1, g.node_count)
            if (i, j) not in present
        ]
        if absent:
            i, j = absent[int(rng.integers(0, len(absent)))]
            g2 = WeightedGraph(g.node_count, g.edges + ((i, j, 0.5),))
            lam2 = algebraic_connectivity(build_laplacian(g2)).lambda2
            assert lam2 >= lam - 1e-9


def test_result_is_deterministic():
    g = WeightedGraph(4, ((0, 1, 0.3), (1, 2, 0.9), (2, 3, 0.3), (0, 3, 0.9)))
    a = algebraic_connectivity(build_laplacian(g))
    b = algebraic_connectivity(build_laplacian(g))
    assert a.lambda2 == b.lambda2
    assert a.fiedler.tobytes() == b.fiedler.tobytes()


def test_laplacian_structure():
    g = WeightedGraph(3, ((0, 1, 0.5), (1, 2, 0.25)))
    L = build_laplacian(g).entries
    assert np.allclose(L.sum(axis=1), 0.0)
    assert L[0, 1] == -0.5 and L[1, 2] == -0.25
    assert L[1, 1] == 0.75


def test_laplacian_rejects_asymmetric():
    with pytest.raises(ShapeMismatch):
        LaplacianMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ShapeMismatch):
        LaplacianMatrix(np.zeros((2, 3)))


def test_graph_validation():
    with pytest.raises(ShapeMismatch):
        WeightedGraph(2, ((0, 0, 1.0),))
    with pytest.raises(ShapeMismatch):
        WeightedGraph(2, ((1, 0, 1.0),))  # edges are stored with i < j
    with pytest.raises(ShapeMismatch):
        WeightedGraph(3, ((0, 1, 1.0), (0, 1, 0.5)))
    with pytest.raises(ShapeMismatch):
        WeightedGraph(2, ((0, 1, 1.5),))
    with pytest.raises(ShapeMismatch):
        WeightedGraph(0, ())


def test_weight_lookup_and_degree():
    g = WeightedGraph(3, ((0, 1, 0.5), (1, 2, 0.25)))
    assert g.weight_of(1, 0) == 0.5
    assert g.weight_of(0, 2) == 0.0
    assert abs(g.weighted_degree(1) - 0.75) < 1e-15
    with pytest.raises(NoSuchNode):
        g.weighted_degree(7)


def test_ones_complement_basis_properties():
    Q = ones_complement_basis(5)
    assert Q.shape == (5, 4)
    assert np.allclose(Q.T @ Q, np.eye(4), atol=1e-12)
    assert np.allclose(np.ones(5) @ Q, 0.0, atol=1e-12)

    Qx = ones_complement_basis(5, {1, 3})
    assert Qx.shape == (5, 2)
    assert np.allclose(Qx[[1, 3], :], 0.0)
    live_ones = np.array([1.0, 0.0, 1.0, 0.0, 1.0])
    assert np.allclose(live_ones @ Qx, 0.0, atol=1e-12)

    with pytest.raises(ShapeMismatch):
        ones_complement_basis(3, {0, 1})


def test_edm_membership():
    assert edm_validity(np.array([[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [4.0, 1.0, 0.0]]))
    assert not edm_validity(np.array([[0.0, 1.0, 100.0], [1.0, 0.0, 1.0], [100.0, 1.0, 0.0]]))


def test_edm_rejects_malformed():
    with pytest.raises(ShapeMismatch):
        edm_validity(np.zeros((2, 3)))
    with pytest.raises(ShapeMismatch):
        edm_validity(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ShapeMismatch):
        edm_validity(np.array([[1.0, 1.0], [1.0, 0.0]]))


def test_edm_from_actual_points():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(6, 3))
    D = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    assert edm_validity(D)


def test_link_removal_matches_rebuild(graph_factory):
    rng = np.random.default_rng(5)
    for _ in range(25):
        g = graph_factory(rng)
        i, j, w = g.edges[int(rng.integers(0, len(g.edges)))]
        L1 = perturbed_laplacian_link(build_laplacian(g), i, j, w)
        rebuilt = build_laplacian(
            WeightedGraph(g.node_count, tuple(e for e in g.edges if (e[0], e[1]) != (i, j)))
        )
        assert np.allclose(L1.entries, rebuilt.entries, atol=1e-12)


def test_link_removal_rejects_non_edges():
    L = build_laplacian(unit_path())
    with pytest.raises(NoSuchEdge):
        perturbed_laplacian_link(L, 0, 2, 1.0)
    with pytest.raises(NoSuchEdge):
        perturbed_laplacian_link(L, 0, 1, 0.5)  # wrong weight
    with pytest.raises(NoSuchEdge):
        perturbed_laplacian_link(L, 1, 1, 1.0)


def test_node_removal_isolates(graph_factory):
    rng = np.random.default_rng(7)
    for _ in range(25):
        g = graph_factory(rng)
        i = int(rng.integers(0, g.node_count))
        L1 = perturbed_laplacian_node(build_laplacian(g), i)
        rebuilt = build_laplacian(
            WeightedGraph(g.node_count, tuple(e for e in g.edges if i not in (e[0], e[1])))
        )
        assert np.allclose(L1.entries, rebuilt.entries, atol=1e-12)
        assert np.allclose(L1.entries[i, :], 0.0)
        # isolation disconnects the graph, so lambda2 drops to 0
        assert abs(algebraic_connectivity(L1).lambda2) < 1e-9


def test_node_removal_rejects_bad_indices():
    L = build_laplacian(unit_path())
    with pytest.raises(NoSuchNode):
        perturbed_laplacian_node(L, 5)
    with pytest.raises(NoSuchNode):
        perturbed_laplacian_node(L, 0, {0: 1.0})


def test_connected_components_grouping():
    g = WeightedGraph(5, ((0, 2, 1.0), (1, 3, 0.5)))
    assert connected_components(g) == [[0, 2], [1, 3], [4]]
    # floor can cut weak edges
    assert connected_components(g, weight_floor=0.6) == [[0, 2], [1], [3], [4]]


def test_graph_text_round_trip():
    g = WeightedGraph(4, ((0, 1, 0.125), (2, 3, 1.0)))
    assert graph_from_text(graph_to_text(g)) == g
    parsed = graph_from_text("# comment\n\n1 0 0.5\n")
    assert parsed.edges == ((0, 1, 0.5),)
    with pytest.raises(ShapeMismatch):
        graph_from_text("0 1\n")


def test_graph_file_round_trip(tmp_path):
    g = WeightedGraph(3, ((0, 1, 0.5), (1, 2, 0.7)))
    for name in ("g.json", "g.txt"):
        path = str(tmp_path / name)
        save_graph(path, g)
        assert load_graph(path) == g


@settings(max_examples=60, deadline=None, derandomize=True)
@given(data=st.data())
def test_lambda2_positive_iff_connected(data):
    n = data.draw(st.integers(2, 8))
    possible = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = data.draw(st.lists(st.booleans(), min_size=len(possible), max_size=len(possible)))
    ws = data.draw(
        st.lists(
            st.floats(0.01, 1.0, allow_nan=False, allow_infinity=False),
            min_size=len(possible),
            max_size=len(possible),
        )
    )
    edges = tuple((i, j, w) for ((i, j), k, w) in zip(possible, keep, ws) if k)
    g = WeightedGraph(node_count=n, edges=edges)
    lam = algebraic_connectivity(build_laplacian(g)).lambda2
    if len(connected_components(g)) == 1:
        assert lam > 1e-10
    else:
        assert abs(lam) < 1e-10
