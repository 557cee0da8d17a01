import os

import numpy as np
import pytest

import outbreakpred.netgen as netgen
import outbreakpred.graphwave as graphwave
import outbreakpred.mocks as mocks


def test_config():
    config = graphwave.WaveletConfig()
    assert(config.embedding_dim == 50)
    assert(config.sample_points[0] == 0.0)
    assert(config.sample_points[-1] == 100.0)
    assert(graphwave.WaveletConfig.from_dict(config.to_dict()) == config)
    assert(graphwave.WaveletConfig(scale=2.0).hash() != config.hash())

    with pytest.raises(graphwave.GraphWaveException):
        graphwave.WaveletConfig(cheb_order=1)
    with pytest.raises(graphwave.GraphWaveException):
        graphwave.WaveletConfig(scale=-1.0)
    with pytest.raises(graphwave.GraphWaveException):
        graphwave.WaveletConfig(sample_points=())
    with pytest.raises(graphwave.GraphWaveException):
        graphwave.WaveletConfig(sample_points=(0.0, np.inf))


def test_spectral_gap_and_scale():
    n = 16
    path = mocks.create_path_graph(n)
    gap = graphwave.spectral_gap(path)
    assert(gap == pytest.approx(2 - 2 * np.cos(np.pi / n), rel=1e-6))
    assert(graphwave.default_scale(path) == pytest.approx(graphwave.scale_geom / gap))
    assert(graphwave.WaveletConfig().resolved(path).scale == pytest.approx(graphwave.scale_geom / gap))

    assert(graphwave.lambda_max_bound(mocks.create_star_graph(5)) == 10.0)

    edgeless = netgen.Graph(3, [])
    with pytest.warns(UserWarning):
        assert(graphwave.default_scale(edgeless) == 1.0)


def test_chebyshev_coeffs_at_zero():
    """
    The expansion reproduces exp(-s * 0) = 1 at the bottom of the spectrum
    """
    coeffs = graphwave.heat_chebyshev_coeffs(3.0, 8.0, 40)
    assert(coeffs.size == 41)
    signs = (-1.0) ** np.arange(41)
    assert(np.sum(coeffs * signs) == pytest.approx(1.0, abs=1e-10))


@pytest.mark.parametrize("graph, scale", [
    (mocks.create_path_graph(16), None),
    (mocks.create_path_graph(16), 2.0),
    (mocks.create_cycle_graph(12), 1.0),
    (mocks.create_star_graph(8), 0.5),
    (netgen.generate_er(100, 4.0, 3), 1.0),
])
def test_chebyshev_matches_exact(graph, scale):
    config = graphwave.WaveletConfig(scale=scale).resolved(graph)
    approx = graphwave.heat_wavelets_chebyshev(graph, config)
    exact = graphwave.heat_wavelets_exact(graph, config.scale)
    assert(np.max(np.abs(approx - exact)) < 1e-6)
    assert(np.allclose(exact, exact.T))
    # the heat kernel keeps constants fixed
    assert(np.allclose(exact.sum(axis=0), 1.0))


def test_exact_dense_limit():
    with pytest.raises(graphwave.GraphWaveException):
        graphwave.heat_wavelets_exact(mocks.create_path_graph(20), 1.0, dense_limit=10)


def test_characteristic_embedding():
    psi = np.array([[1.0, 0.2], [0.0, 0.3], [0.0, 0.5]])
    emb = graphwave.characteristic_embedding(psi, [0.0, 1.0])
    assert(emb.shape == (2, 4))
    # phi(0) = 1 for every column
    assert(np.allclose(emb[:, 0], 1.0))
    assert(np.allclose(emb[:, 1], 0.0))
    assert(emb[0, 2] == pytest.approx((np.cos(1.0) + 2.0) / 3.0))
    assert(emb[0, 3] == pytest.approx(np.sin(1.0) / 3.0))


def test_structural_equivalence():
    """
    Nodes with the same structural role get the same embedding
    """
    star = mocks.create_star_graph(6)
    emb = graphwave.embed_nodes(star, cache_dir="")
    assert(emb.shape == (7, 50))
    for leaf in range(2, 7):
        assert(np.allclose(emb[leaf], emb[1], atol=1e-10))
    assert(not np.allclose(emb[0], emb[1]))

    path = mocks.create_path_graph(9)
    emb = graphwave.embed_nodes(path, cache_dir="")
    assert(np.allclose(emb[0], emb[8], atol=1e-10))
    assert(np.allclose(emb[2], emb[6], atol=1e-10))
    assert(not np.allclose(emb[0], emb[4]))


def test_permutation_equivariance():
    graph = netgen.generate_er(60, 4.0, 8)
    perm = np.random.default_rng(1).permutation(graph.n)
    emb = graphwave.embed_nodes(graph, cache_dir="")
    emb_perm = graphwave.embed_nodes(graph.relabel(perm), cache_dir="")
    assert(np.allclose(emb_perm[perm], emb, atol=1e-8))


def test_disjoint_copies():
    graph = netgen.generate_ba(30, 2, 5)
    doubled = mocks.create_two_copies(graph)
    emb = graphwave.embed_nodes(doubled, cache_dir="")
    assert(np.allclose(emb[:30], emb[30:], atol=1e-10))


def test_exact_and_chebyshev_embeddings_agree():
    graph = mocks.create_path_graph(16)
    cheb = graphwave.embed_nodes(graph, method="chebyshev", cache_dir="")
    exact = graphwave.embed_nodes(graph, method="exact", cache_dir="")
    assert(np.allclose(cheb, exact, atol=1e-6))
    with pytest.raises(graphwave.GraphWaveException):
        graphwave.embed_nodes(graph, method="spectral", cache_dir="")


def test_workers_do_not_change_result():
    graph = netgen.generate_er(600, 4.0, 2)
    config = graphwave.WaveletConfig(scale=1.0)
    serial = graphwave.embed_nodes(graph, config, cache_dir="", n_workers=1)
    threaded = graphwave.embed_nodes(graph, config, cache_dir="", n_workers=3)
    assert(np.array_equal(serial, threaded))


def test_embedding_cache(tmp_path):
    graph = mocks.create_cycle_graph(20)
    config = graphwave.WaveletConfig(scale=1.5)
    cache_dir = os.path.join(tmp_path, "cache")
    first = graphwave.embed_nodes(graph, config, cache_dir=cache_dir)
    files = os.listdir(cache_dir)
    assert(len(files) == 1)
    assert(files[0].startswith("gw_") and files[0].endswith(".fits"))

    second = graphwave.embed_nodes(graph, config, cache_dir=cache_dir)
    assert(np.array_equal(first, second))

    # a different scale is a different cache entry
    graphwave.embed_nodes(graph, graphwave.WaveletConfig(scale=3.0), cache_dir=cache_dir)
    assert(len(os.listdir(cache_dir)) == 2)

    # a file whose fingerprints do not match is ignored
    filepath = os.path.join(cache_dir, files[0])
    graphwave.save_embedding_cache(filepath, np.zeros_like(first), "0" * 64, "0" * 64)
    third = graphwave.embed_nodes(graph, config, cache_dir=cache_dir)
    assert(np.allclose(third, first))


def test_embedding_csv(tmp_path):
    emb = graphwave.embed_nodes(mocks.create_path_graph(10), cache_dir="")
    filepath = os.path.join(tmp_path, "embedding.csv")
    graphwave.export_embedding_csv(emb, filepath)
    with open(filepath) as f:
        assert(f.readline().startswith("# outbreakpred format-version"))
        assert(f.readline().startswith("node_id,e_1,e_2"))
    assert(np.array_equal(graphwave.load_embedding_csv(filepath), emb))


if __name__ == "__main__":
    test_config()
    test_spectral_gap_and_scale()
    test_structural_equivalence()
    test_permutation_equivariance()
