import numpy as np
import pytest

from dgp_pursuit.network import (
    DroneGraph,
    GraphError,
    NotPositiveDefinite,
    adjacency,
    h_matrix,
    laplacian,
    neighbors,
    p_matrix,
)


def random_connected_graph(rng, n):
    """Random spanning tree plus extra random edges."""
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, n)}
    for _ in range(rng.integers(0, n * 2)):
        i, j = rng.choice(n, 2, replace=False)
        edges.add((int(min(i, j)), int(max(i, j))))
    return edges


def test_laplacian_examples():
    assert np.array_equal(laplacian(DroneGraph.complete(3)), [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])
    assert np.array_equal(laplacian(DroneGraph.path(3)), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    assert np.array_equal(laplacian(DroneGraph(1)), [[0]])


def test_laplacian_rows_sum_to_zero(rng):
    for _ in range(50):
        n = int(rng.integers(1, 13))
        L = laplacian(DroneGraph(n, frozenset(random_connected_graph(rng, n))))
        assert np.array_equal(L @ np.ones(n), np.zeros(n))
        assert np.array_equal(L, L.T)


def test_h_matrix_path_example():
    H = h_matrix(DroneGraph.path(3).with_visibility([1, 0, 0]))
    assert np.array_equal(H, [[2, -1, 0], [-1, 2, -1], [0, -1, 1]])
    minors = [np.linalg.det(H[:k, :k]) for k in (1, 2, 3)]
    assert np.allclose(minors, [2, 3, 1])
    assert np.linalg.eigvalsh(H)[0] > 0


def test_h_matrix_complete_spectrum():
    H = h_matrix(DroneGraph.complete(3))
    assert np.allclose(np.linalg.eigvalsh(H), [1, 4, 4])


def test_h_matrix_all_invisible_is_singular():
    g = DroneGraph.complete(4).with_visibility([0, 0, 0, 0])
    with pytest.raises(NotPositiveDefinite) as info:
        h_matrix(g)
    assert np.array_equal(info.value.matrix, laplacian(g))
    assert abs(info.value.min_eig) < 1e-10
    assert np.array_equal(h_matrix(g, check=False), laplacian(g))


def test_p_matrix_examples():
    assert np.array_equal(p_matrix(0, 1), [[1]])
    assert np.array_equal(p_matrix(0, 3), [[1, 0.5, 0.5], [0.5, 0, 0], [0.5, 0, 0]])
    # entry-wise definition: 1 at (i, i), 0.5 on the rest of row and column i
    assert np.array_equal(p_matrix(0, 2) + p_matrix(1, 2), [[1, 1], [1, 1]])
    for n in range(1, 6):
        for i in range(n):
            P = p_matrix(i, n)
            assert np.array_equal(P, P.T)
    with pytest.raises(IndexError):
        p_matrix(3, 3)


def test_neighbors_examples():
    assert neighbors(DroneGraph.complete(3), 0) == {1, 2}
    assert neighbors(DroneGraph.path(3), 1) == {0, 2}
    assert neighbors(DroneGraph.path(3), 0) == {1}
    with pytest.raises(IndexError):
        neighbors(DroneGraph.path(3), 5)


def test_adjacency_symmetric():
    A = adjacency(DroneGraph.path(4))
    assert np.array_equal(A, A.T) and A.sum() == 6


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n=0),
        dict(n=3, edges=frozenset({(0, 1)})),  # disconnected
        dict(n=2, edges=frozenset({(0, 0)})),
        dict(n=2, edges=frozenset({(0, 2)})),
        dict(n=2, edges=frozenset({(0, 1)}), d=(1.0, 0.0)),
        dict(n=2, edges=frozenset({(0, 1)}), v=(1, 2)),
        dict(n=2, edges=frozenset({(0, 1)}), d=(1.0,)),
    ],
)
def test_invalid_graphs_rejected(kwargs):
    with pytest.raises(GraphError):
        DroneGraph(**kwargs)


def test_json_round_trip():
    g = DroneGraph(3, frozenset({(0, 1), (1, 2)}), (1.0, 2.0, 0.5))
    h = DroneGraph.from_json(g.to_json())
    assert h == g
    assert DroneGraph.from_json({"n": 4}) == DroneGraph.complete(4)


def test_graph_accepts_arrays():
    g = DroneGraph(2, [(0, 1)], np.array([0.5, 2.0]), np.array([1, 0]))
    assert g.d == (0.5, 2.0) and g.v == (1, 0)
