"""
GraphWave structural node embeddings: heat-kernel wavelets on the graph Laplacian
(Chebyshev expansion, with a dense eigendecomposition reference for small graphs),
summarized per node by the empirical characteristic function of its wavelet.
"""
import hashlib
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg
import scipy.special
import astropy.io.fits as fits

import outbreakpred
import outbreakpred.check as check
import outbreakpred.netgen as netgen


class GraphWaveException(Exception):
    """Exception class for the graphwave module."""


# mid-range heat scale of the GraphWave heuristic, divided by the spectral gap
scale_geom = 0.85 * np.sqrt(np.log(2) * np.log(3))

# eigenvalues below this count as zero when looking for the spectral gap
zero_eigenvalue_tol = 1e-8

column_block = 256


def default_sample_points():
    return tuple(float(t) for t in np.linspace(0, 100, 25))


@dataclass(frozen=True)
class WaveletConfig:
    """
    Wavelet and characteristic-function settings

    Args:
        scale (float): heat-kernel scale s > 0, or None for the spectral-gap default
        cheb_order (int): Chebyshev order K (>= 2)
        sample_points (tuple): evaluation points t_1..t_d of the characteristic function
    """
    scale: float = None
    cheb_order: int = 40
    sample_points: tuple = field(default_factory=default_sample_points)

    def __post_init__(self):
        if self.scale is not None:
            check.real_positive_scalar(self.scale, "scale", GraphWaveException)
        check.positive_scalar_integer(self.cheb_order, "cheb_order", GraphWaveException)
        if self.cheb_order < 2:
            raise GraphWaveException("cheb_order must be at least 2")
        points = check.oneD_array(self.sample_points, "sample_points", GraphWaveException)
        if not np.all(np.isfinite(points)):
            raise GraphWaveException("sample_points must be finite")
        object.__setattr__(self, "sample_points", tuple(float(t) for t in points))

    @property
    def embedding_dim(self):
        """Length 2d of an embedding row"""
        return 2 * len(self.sample_points)

    def resolved(self, graph):
        """
        Copy of the config with the scale filled in for a graph

        Args:
            graph (outbreakpred.netgen.Graph): graph

        Returns:
            outbreakpred.graphwave.WaveletConfig: config with a concrete scale
        """
        if self.scale is not None:
            return self
        return WaveletConfig(default_scale(graph), self.cheb_order, self.sample_points)

    def to_dict(self):
        return {"scale": self.scale, "cheb_order": self.cheb_order, "sample_points": list(self.sample_points)}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("scale"), d.get("cheb_order", 40), tuple(d.get("sample_points", default_sample_points())))

    def hash(self):
        """
        Fingerprint of the config, used as part of the embedding cache key

        Returns:
            str: hex digest
        """
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def spectral_gap(graph):
    """
    Smallest non-zero Laplacian eigenvalue

    Args:
        graph (outbreakpred.netgen.Graph): graph

    Returns:
        float: lambda_2, or None for a graph without edges
    """
    if graph.num_edges == 0:
        return None
    lap = netgen.laplacian(graph).astype(np.float64)
    n_comp, _ = scipy.sparse.csgraph.connected_components(graph.adjacency(), directed=False)
    n_eig = n_comp + 1
    if graph.n <= outbreakpred.dense_limit or n_eig >= graph.n - 1:
        eigvals = scipy.linalg.eigvalsh(lap.toarray())
    else:
        # shift-invert just below zero returns the smallest eigenvalues
        eigvals = scipy.sparse.linalg.eigsh(lap, k=n_eig, sigma=-1e-3, which="LM",
                                            return_eigenvectors=False)
    nonzero = np.sort(eigvals[eigvals > zero_eigenvalue_tol])
    return float(nonzero[0]) if nonzero.size else None


def default_scale(graph):
    """
    Heat scale s_geom / lambda_2. Falls back to 1 for graphs without edges.

    Args:
        graph (outbreakpred.netgen.Graph): graph

    Returns:
        float: scale
    """
    gap = spectral_gap(graph)
    if gap is None:
        warnings.warn("graph has no edges; using heat scale 1.0")
        return 1.0
    return float(scale_geom / gap)


def lambda_max_bound(graph):
    """
    Gershgorin bound on the largest Laplacian eigenvalue: 2 * max degree
    (at least 2, so an edgeless graph still gets a valid interval)
    """
    max_deg = int(graph.degrees.max()) if graph.n else 0
    return 2.0 * max(max_deg, 1)


def heat_chebyshev_coeffs(scale, lambda_max, order):
    """
    Chebyshev coefficients of exp(-scale * lambda) on [0, lambda_max], in the
    variable x = 2 lambda / lambda_max - 1

    Args:
        scale (float): heat scale
        lambda_max (float): upper end of the spectrum interval
        order (int): highest polynomial order K

    Returns:
        np.array: K+1 coefficients c_0..c_K
    """
    a = scale * lambda_max / 2.0
    k = np.arange(order + 1)
    coeffs = 2.0 * (-1.0) ** k * scipy.special.ive(k, a)
    coeffs[0] /= 2.0
    return coeffs


def _chebyshev_columns(lap_scaled, coeffs, columns, n):
    # T_0 X, T_1 X, ... applied to the unit vectors of `columns`
    x = np.zeros((n, len(columns)))
    x[columns, np.arange(len(columns))] = 1.0
    t_prev = x
    t_curr = lap_scaled @ x
    result = coeffs[0] * t_prev + coeffs[1] * t_curr
    for c in coeffs[2:]:
        t_next = 2.0 * (lap_scaled @ t_curr) - t_prev
        result += c * t_next
        t_prev, t_curr = t_curr, t_next
    return result


def _scaled_laplacian(graph):
    lam_max = lambda_max_bound(graph)
    lap = netgen.laplacian(graph).astype(np.float64)
    return lam_max, (2.0 / lam_max) * lap - sparse.identity(graph.n, format="csr")


def heat_wavelets_chebyshev(graph, config):
    """
    Heat-kernel wavelet matrix Psi ~ U exp(-s Lambda) U^T from a K-order
    Chebyshev expansion on [0, 2 * max degree]. Column a is the wavelet centered
    on node a. No eigendecomposition is performed.

    Args:
        graph (outbreakpred.netgen.Graph): graph
        config (outbreakpred.graphwave.WaveletConfig): scale and order

    Returns:
        np.array: N x N wavelet matrix
    """
    config = config.resolved(graph)
    lam_max, lap_scaled = _scaled_laplacian(graph)
    coeffs = heat_chebyshev_coeffs(config.scale, lam_max, config.cheb_order)
    return _chebyshev_columns(lap_scaled, coeffs, np.arange(graph.n), graph.n)


def heat_wavelets_exact(graph, scale, dense_limit=None):
    """
    Exact wavelet matrix from a dense symmetric eigendecomposition. Reference
    for small graphs.

    Args:
        graph (outbreakpred.netgen.Graph): graph
        scale (float): heat scale (>= 0)
        dense_limit (int): largest admissible node count. Defaults to the configured value.

    Returns:
        np.array: N x N wavelet matrix
    """
    check.real_nonnegative_scalar(scale, "scale", GraphWaveException)
    if dense_limit is None:
        dense_limit = outbreakpred.dense_limit
    if graph.n > dense_limit:
        raise GraphWaveException("graph with {0} nodes exceeds the dense limit of {1}".format(graph.n, dense_limit))
    lap = netgen.laplacian(graph).toarray().astype(np.float64)
    eigvals, eigvecs = scipy.linalg.eigh(lap)
    return (eigvecs * np.exp(-scale * eigvals)) @ eigvecs.T


def characteristic_embedding(psi_columns, sample_points):
    """
    Empirical characteristic function of every column, phi_a(t) = mean_m exp(i t Psi[m, a]),
    laid out as (Re phi(t_1), Im phi(t_1), ..., Re phi(t_d), Im phi(t_d))

    Args:
        psi_columns (np.array): N x b block of wavelet columns
        sample_points (array_like): t_1..t_d

    Returns:
        np.array: b x 2d embedding rows
    """
    out = np.empty((psi_columns.shape[1], 2 * len(sample_points)))
    for j, t in enumerate(sample_points):
        phase = t * psi_columns
        out[:, 2 * j] = np.cos(phase).mean(axis=0)
        out[:, 2 * j + 1] = np.sin(phase).mean(axis=0)
    return out


def _cache_path(cache_dir, graph_hash, config_hash):
    return os.path.join(cache_dir, "gw_{0}_{1}.fits".format(graph_hash[:16], config_hash[:16]))


def _load_cached(filepath, graph_hash, config_hash):
    if not os.path.exists(filepath):
        return None
    with fits.open(filepath) as hdulist:
        hdr = hdulist[0].header
        if hdr.get("FORMATV") != outbreakpred.format_version or hdr.get("GHASH") != graph_hash \
                or hdr.get("CFGHASH") != config_hash:
            return None
        return np.array(hdulist[0].data, dtype=np.float64)


def save_embedding_cache(filepath, embedding, graph_hash, config_hash):
    """
    Writes an embedding matrix as FITS with the format version and both fingerprints

    Args:
        filepath (str): output path
        embedding (np.array): N x 2d matrix
        graph_hash (str): Graph.hash() of the embedded graph
        config_hash (str): WaveletConfig.hash() of the resolved config
    """
    hdr = fits.Header()
    hdr["FORMATV"] = outbreakpred.format_version
    hdr["GHASH"] = graph_hash
    hdr["CFGHASH"] = config_hash
    fits.PrimaryHDU(data=embedding, header=hdr).writeto(filepath, overwrite=True)


def embed_nodes(graph, config=None, method="chebyshev", cache_dir=None, n_workers=1):
    """
    GraphWave embedding of every node

    Args:
        graph (outbreakpred.netgen.Graph): graph
        config (outbreakpred.graphwave.WaveletConfig): settings. Defaults to WaveletConfig().
        method (str): "chebyshev" or "exact"
        cache_dir (str): where cached embeddings live. Defaults to the configured
            cache directory when caching is on; pass "" to disable.
        n_workers (int): threads over column blocks; the result does not depend on it

    Returns:
        np.array: N x 2d embedding matrix
    """
    if config is None:
        config = WaveletConfig()
    if method not in ("chebyshev", "exact"):
        raise GraphWaveException("unknown wavelet method {0}".format(method))
    config = config.resolved(graph)
    if cache_dir is None:
        cache_dir = outbreakpred.embedding_cache_dir if outbreakpred.cache_embeddings else ""

    graph_hash = graph.hash()
    config_hash = hashlib.sha256((config.hash() + method).encode()).hexdigest()
    if cache_dir:
        filepath = _cache_path(cache_dir, graph_hash, config_hash)
        cached = _load_cached(filepath, graph_hash, config_hash)
        if cached is not None:
            return cached

    if method == "exact":
        psi = heat_wavelets_exact(graph, config.scale)
        embedding = characteristic_embedding(psi, config.sample_points)
    else:
        lam_max, lap_scaled = _scaled_laplacian(graph)
        coeffs = heat_chebyshev_coeffs(config.scale, lam_max, config.cheb_order)
        blocks = [np.arange(start, min(start + column_block, graph.n)) for start in range(0, graph.n, column_block)]

        def embed_block(cols):
            return characteristic_embedding(_chebyshev_columns(lap_scaled, coeffs, cols, graph.n),
                                            config.sample_points)

        if n_workers > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as executor:
                parts = list(executor.map(embed_block, blocks))
        else:
            parts = [embed_block(cols) for cols in blocks]
        embedding = np.concatenate(parts, axis=0)

    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        save_embedding_cache(filepath, embedding, graph_hash, config_hash)
    return embedding


def export_embedding_csv(embedding, filepath):
    """
    Writes `node_id,e_1..e_2d` CSV preceded by a format-version comment

    Args:
        embedding (np.array): N x 2d matrix
        filepath (str): output path
    """
    columns = ["e_{0}".format(i + 1) for i in range(embedding.shape[1])]
    df = pd.DataFrame(embedding, columns=columns)
    df.insert(0, "node_id", np.arange(embedding.shape[0]))
    with open(filepath, "w") as f:
        f.write("# outbreakpred format-version {0}\n".format(outbreakpred.format_version))
        df.to_csv(f, index=False, float_format="%.17g")


def load_embedding_csv(filepath):
    df = pd.read_csv(filepath, comment="#")
    return df.drop(columns="node_id").to_numpy(dtype=np.float64)
