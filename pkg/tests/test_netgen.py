import os

import numpy as np
import pytest

import outbreakpred.netgen as netgen
import outbreakpred.mocks as mocks


def test_graph_canonical_edges():
    """
    Self-loops and duplicates in either orientation are dropped, edges are stored u < v
    """
    graph = netgen.Graph(4, [(1, 0), (0, 1), (2, 2), (2, 1), (3, 1)])
    assert(graph.num_edges == 3)
    assert(np.array_equal(graph.edges, [[0, 1], [1, 2], [1, 3]]))
    assert(np.array_equal(graph.neighbors(1), [0, 2, 3]))
    assert(np.array_equal(graph.degrees, [1, 3, 1, 1]))
    assert(graph.avg_degree == pytest.approx(1.5))

    with pytest.raises(ValueError):
        graph.edges[0, 0] = 5

    with pytest.raises(netgen.NetgenException):
        netgen.Graph(3, [(0, 3)])
    with pytest.raises(netgen.NetgenException):
        netgen.Graph(0, [])


def test_graph_hash_and_relabel():
    path = mocks.create_path_graph(5)
    same = netgen.Graph(5, [(1, 0), (2, 1), (3, 2), (4, 3)])
    assert(path == same)
    assert(path.hash() == same.hash())

    reversed_path = path.relabel([4, 3, 2, 1, 0])
    # a path reversed is the same edge set
    assert(reversed_path == path)
    shifted = path.relabel([1, 2, 3, 4, 0])
    assert(shifted.hash() != path.hash())
    assert(shifted.num_edges == path.num_edges)

    with pytest.raises(netgen.NetgenException):
        path.relabel([0, 0, 1, 2, 3])


def test_to_networkx_keeps_isolated_nodes():
    graph = netgen.Graph(6, [(0, 1), (1, 2)])
    g = graph.to_networkx()
    assert(g.number_of_nodes() == 6)
    assert(g.number_of_edges() == 2)


def test_generate_er():
    """
    ER graphs are reproducible from the seed and hit the requested mean degree
    """
    graph = netgen.generate_er(2000, 5.0, 1)
    assert(graph.n == 2000)
    assert(abs(graph.avg_degree - 5.0) < 0.3)

    again = netgen.generate_er(2000, 5.0, 1)
    assert(again == graph)
    other = netgen.generate_er(2000, 5.0, 2)
    assert(other != graph)

    with pytest.raises(netgen.NetgenException):
        netgen.generate_er(10, 10.0, 0)
    with pytest.raises(netgen.NetgenException):
        netgen.generate_er(1, 0.5, 0)
    with pytest.raises(netgen.NetgenException):
        netgen.generate_er(10, 2.0, -1)


def test_generate_ba():
    """
    BA graphs have exactly m(m-1)/2 + m(n-m) edges and a heavy tail
    """
    n, m = 500, 3
    graph = netgen.generate_ba(n, m, 4)
    assert(graph.n == n)
    assert(graph.num_edges == m * (m - 1) // 2 + m * (n - m))
    # every node added after the seed clique brings m edges
    assert(np.all(graph.degrees[m:] >= m))
    assert(graph.degrees.max() > 5 * m)
    assert(netgen.generate_ba(n, m, 4) == graph)

    tree = netgen.generate_ba(10, 1, 0)
    assert(tree.num_edges == 9)

    with pytest.raises(netgen.NetgenException):
        netgen.generate_ba(3, 3, 0)


def test_generate_ws():
    ring = netgen.generate_ws(100, 4, 0.0, 0)
    assert(ring.num_edges == 200)
    assert(np.all(ring.degrees == 4))

    rewired = netgen.generate_ws(100, 4, 0.2, 7)
    assert(rewired.num_edges == 200)
    assert(rewired != ring)
    assert(netgen.generate_ws(100, 4, 0.2, 7) == rewired)

    with pytest.raises(netgen.NetgenException):
        netgen.generate_ws(10, 4, 1.5, 0)


def test_edge_list_io(tmp_path):
    """
    Comments and blank lines are skipped and ids are compacted by first appearance
    """
    filepath = os.path.join(tmp_path, "edges.txt")
    with open(filepath, "w") as f:
        f.write("# a comment\n\n10 20\n20 30\n30 30\n20 10\n")
    graph = netgen.load_edge_list(filepath)
    assert(graph.n == 3)
    assert(np.array_equal(graph.edges, [[0, 1], [1, 2]]))

    saved = os.path.join(tmp_path, "path.txt")
    path = mocks.create_path_graph(12)
    netgen.save_edge_list(path, saved)
    with open(saved) as f:
        assert(f.readline().startswith("# outbreakpred format-version"))
    assert(netgen.load_edge_list(saved) == path)

    # the node-count comment keeps the original ids
    netgen.save_edge_list(mocks.create_cycle_graph(12), saved)
    assert(netgen.load_edge_list(saved) == mocks.create_cycle_graph(12))


def test_edge_list_keeps_isolated_nodes(tmp_path):
    """
    A sparse ER graph has nodes without edges; reloading it must not drop them
    """
    graph = netgen.generate_er(2000, 5, 1)
    assert(np.any(graph.degrees == 0))
    filepath = os.path.join(tmp_path, "er.txt")
    netgen.save_edge_list(graph, filepath)
    reloaded = netgen.load_edge_list(filepath)
    assert(reloaded.n == 2000)
    assert(reloaded.hash() == graph.hash())
    assert(reloaded.avg_degree == graph.avg_degree)

    # a declared count with nothing but isolated nodes is still a graph
    with open(filepath, "w") as f:
        f.write("# n=4 edges=0\n")
    assert(netgen.load_edge_list(filepath) == netgen.Graph(4, []))

    with open(filepath, "w") as f:
        f.write("# n=3 edges=1\n0 3\n")
    with pytest.raises(netgen.NetgenException):
        netgen.load_edge_list(filepath)


def test_edge_list_errors(tmp_path):
    bad = os.path.join(tmp_path, "bad.txt")
    with open(bad, "w") as f:
        f.write("0 1\n1 two\n")
    with pytest.raises(netgen.NetgenException):
        netgen.load_edge_list(bad)

    with open(bad, "w") as f:
        f.write("0 1 2\n")
    with pytest.raises(netgen.NetgenException):
        netgen.load_edge_list(bad)

    empty = os.path.join(tmp_path, "empty.txt")
    with open(empty, "w") as f:
        f.write("# nothing\n")
    with pytest.raises(netgen.NetgenException):
        netgen.load_edge_list(empty)

    with pytest.raises(netgen.NetgenException):
        netgen.load_edge_list(os.path.join(tmp_path, "missing.txt"))


def test_build_network(tmp_path):
    spec = netgen.NetworkSpec("ER", n=300, avg_degree=4.0, rng_seed=3)
    assert(netgen.build_network(spec) == netgen.generate_er(300, 4.0, 3))
    assert(netgen.NetworkSpec.from_dict(spec.to_dict()) == spec)

    ba = netgen.build_network(netgen.NetworkSpec("ba", n=50, m=2, rng_seed=1))
    assert(ba.num_edges == 1 + 2 * 48)

    filepath = os.path.join(tmp_path, "star.txt")
    netgen.save_edge_list(mocks.create_star_graph(4), filepath)
    star = netgen.build_network(netgen.NetworkSpec("File", path=filepath))
    assert(star.num_edges == 4)

    with pytest.raises(netgen.NetgenException):
        netgen.build_network(netgen.NetworkSpec("lattice", n=10))


def test_laplacian_and_degree_stats():
    star = mocks.create_star_graph(5)
    lap = netgen.laplacian(star).toarray()
    assert(np.all(lap.sum(axis=1) == 0))
    assert(np.array_equal(lap, lap.T))
    assert(lap[0, 0] == 5)

    stats = netgen.degree_stats(netgen.Graph(7, [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]))
    assert(stats["n"] == 7)
    assert(stats["edges"] == 5)
    assert(stats["max_degree"] == 5)
    assert(stats["min_degree"] == 0)
    assert(stats["isolated"] == 1)
    assert(stats["avg_degree"] == pytest.approx(10 / 7))


if __name__ == "__main__":
    test_graph_canonical_edges()
    test_graph_hash_and_relabel()
    test_generate_er()
    test_generate_ba()
    test_generate_ws()
