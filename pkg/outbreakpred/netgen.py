"""
Contact network generation and loading (ER, BA, Watts-Strogatz, edge lists)
plus the graph algebra needed by the simulator and the embeddings.
"""
import hashlib
import re
from dataclasses import dataclass, asdict

import numpy as np
import scipy.sparse as sparse
import networkx as nx

import outbreakpred
import outbreakpred.check as check


class NetgenException(Exception):
    """Exception class for the netgen module."""


# "# n=<N> ..." comment written by save_edge_list
_node_count_header = re.compile(r"^#\s*n=(\d+)\b")


class Graph():
    """
    Immutable simple undirected graph stored as a sorted edge list plus CSR adjacency

    Args:
        n (int): number of nodes
        edges (array_like): (E, 2) integer array of node pairs. Self-loops and
            duplicates (in either orientation) are dropped.

    Attributes:
        n (int): number of nodes
        edges (np.array): (E, 2) int64 array with u < v, sorted lexicographically
        indptr (np.array): CSR row pointers, length n+1
        indices (np.array): CSR column indices; neighbors of v are indices[indptr[v]:indptr[v+1]], sorted
    """
    def __init__(self, n, edges):
        check.positive_scalar_integer(n, "n", NetgenException)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size > 0 and (edges.min() < 0 or edges.max() >= n):
            raise NetgenException("edge endpoints must lie in 0..{0}".format(n - 1))

        # canonical orientation, no self-loops, no duplicates
        edges = np.sort(edges, axis=1)
        edges = edges[edges[:, 0] != edges[:, 1]]
        edges = np.unique(edges, axis=0)

        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        adj = sparse.csr_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(n, n))
        adj.sort_indices()

        self.n = int(n)
        self.edges = edges
        self.indptr = adj.indptr.astype(np.int64)
        self.indices = adj.indices.astype(np.int64)
        for arr in (self.edges, self.indptr, self.indices):
            arr.flags.writeable = False

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def degrees(self):
        return np.diff(self.indptr)

    @property
    def avg_degree(self):
        return 2.0 * self.num_edges / self.n

    def neighbors(self, v):
        """
        Sorted neighbor ids of node v

        Args:
            v (int): node id

        Returns:
            np.array: read-only view of the neighbor ids
        """
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adjacency(self):
        """
        Sparse adjacency matrix

        Returns:
            scipy.sparse.csr_matrix: symmetric 0/1 adjacency, int64
        """
        data = np.ones(self.indices.size, dtype=np.int64)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def hash(self):
        """
        Content hash of the graph (node count + canonical edge list)

        Returns:
            str: hex sha256 digest
        """
        digest = hashlib.sha256()
        digest.update(np.int64(self.n).tobytes())
        digest.update(np.ascontiguousarray(self.edges).tobytes())
        return digest.hexdigest()

    def relabel(self, permutation):
        """
        Returns an isomorphic copy where node v becomes permutation[v]

        Args:
            permutation (array_like): a permutation of 0..n-1

        Returns:
            outbreakpred.netgen.Graph: relabeled graph
        """
        permutation = np.asarray(permutation, dtype=np.int64)
        if permutation.shape != (self.n,) or not np.array_equal(np.sort(permutation), np.arange(self.n)):
            raise NetgenException("relabel needs a permutation of 0..{0}".format(self.n - 1))
        return Graph(self.n, permutation[self.edges])

    def to_networkx(self):
        """
        Converts this graph into a networkx.Graph (all n nodes kept, including isolated ones)

        Returns:
            networkx.Graph: the same graph
        """
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges.tolist())
        return g

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash(self.hash())

    def __repr__(self):
        return "Graph(n={0}, m={1}, <k>={2:.3f})".format(self.n, self.num_edges, self.avg_degree)


@dataclass(frozen=True)
class NetworkSpec:
    """
    Description of a contact network to build

    Args:
        kind (str): "ER", "BA", "WS" or "File"
        n (int): node count (ignored for File)
        avg_degree (float): target mean degree (ER only)
        m (int): attachment parameter (BA only)
        k (int): ring degree (WS only)
        p (float): rewiring probability (WS only)
        path (str): edge-list location (File only)
        rng_seed (int): 64-bit seed
    """
    kind: str
    n: int = 0
    avg_degree: float = 0.0
    m: int = 0
    k: int = 0
    p: float = 0.0
    path: str = ""
    rng_seed: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        return cls(**values)


def _rng(rng_seed):
    """
    Single-stream generator used for graph construction

    Args:
        rng_seed (int): 64-bit seed

    Returns:
        np.random.Generator: generator seeded deterministically
    """
    check.nonnegative_scalar_integer(rng_seed, "rng_seed", NetgenException)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(rng_seed))))


def generate_er(n, avg_degree, rng_seed):
    """
    Erdos-Renyi G(n, p) graph with p = avg_degree / (n - 1).
    Isolated nodes are kept so n always matches the request.

    Args:
        n (int): node count (>= 2)
        avg_degree (float): target mean degree, 0 < avg_degree <= n - 1
        rng_seed (int): seed

    Returns:
        outbreakpred.netgen.Graph: the generated graph
    """
    check.positive_scalar_integer(n, "n", NetgenException)
    if n < 2:
        raise NetgenException("n must be at least 2")
    check.real_positive_scalar(avg_degree, "avg_degree", NetgenException)
    if avg_degree > n - 1:
        raise NetgenException("avg_degree must not exceed n - 1 = {0}".format(n - 1))

    p = avg_degree / (n - 1)
    rng = _rng(rng_seed)
    sources = []
    targets = []
    # one row of the upper triangle at a time keeps memory linear in n
    for u in range(n - 1):
        hits = np.nonzero(rng.random(n - 1 - u) < p)[0]
        if hits.size:
            sources.append(np.full(hits.size, u, dtype=np.int64))
            targets.append(hits + u + 1)
    if sources:
        edges = np.column_stack([np.concatenate(sources), np.concatenate(targets)])
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return Graph(n, edges)


def generate_ba(n, m, rng_seed):
    """
    Barabasi-Albert preferential attachment graph.

    Starts from a clique on nodes 0..m-1; every later node attaches to m distinct
    existing nodes chosen with probability proportional to their degree (uniformly
    while all existing degrees are zero, which only happens for m = 1).

    Args:
        n (int): node count
        m (int): attachment parameter, 1 <= m < n
        rng_seed (int): seed

    Returns:
        outbreakpred.netgen.Graph: graph with m(m-1)/2 + m(n-m) edges
    """
    check.positive_scalar_integer(n, "n", NetgenException)
    check.positive_scalar_integer(m, "m", NetgenException)
    if m >= n:
        raise NetgenException("m must be smaller than n (got m={0}, n={1})".format(m, n))

    rng = _rng(rng_seed)
    degrees = np.zeros(n, dtype=np.float64)
    edges = [(u, v) for u in range(m) for v in range(u + 1, m)]
    degrees[:m] = m - 1

    for new_node in range(m, n):
        existing = degrees[:new_node]
        total = existing.sum()
        if total > 0:
            targets = rng.choice(new_node, size=m, replace=False, p=existing / total)
        else:
            targets = rng.choice(new_node, size=m, replace=False)
        for target in np.sort(targets):
            edges.append((int(target), new_node))
        degrees[targets] += 1
        degrees[new_node] = m

    return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2))


def generate_ws(n, k, p, rng_seed):
    """
    Watts-Strogatz small-world graph (ring lattice with rewiring), built with networkx

    Args:
        n (int): node count
        k (int): each node joined to its k nearest ring neighbors (k even, k < n)
        p (float): rewiring probability in [0, 1]
        rng_seed (int): seed

    Returns:
        outbreakpred.netgen.Graph: the generated graph
    """
    check.positive_scalar_integer(n, "n", NetgenException)
    check.positive_scalar_integer(k, "k", NetgenException)
    check.probability(p, "p", NetgenException)
    check.nonnegative_scalar_integer(rng_seed, "rng_seed", NetgenException)
    if k >= n:
        raise NetgenException("k must be smaller than n")
    g = nx.watts_strogatz_graph(n, k, p, seed=int(rng_seed) % (2**32))
    return Graph(n, np.array(sorted(g.edges()), dtype=np.int64).reshape(-1, 2))


def load_edge_list(path):
    """
    Reads a whitespace-separated edge list, one "u v" pair per line.
    Lines starting with '#' and blank lines are skipped; self-loops and duplicates
    are dropped. A "# n=<N>" comment (written by save_edge_list) fixes the node
    count: ids are then kept as they are and nodes without edges survive.
    Without it, node ids are compacted to 0..n-1 in order of first appearance.

    Args:
        path (str): filepath of the edge list

    Returns:
        outbreakpred.netgen.Graph: the loaded graph
    """
    try:
        with open(path, "r") as f:
            lines = f.readlines()
    except OSError as e:
        raise NetgenException("could not read edge list {0}: {1}".format(path, e))

    declared_n = None
    raw_pairs = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if len(stripped) == 0:
            continue
        if stripped.startswith("#"):
            header = _node_count_header.match(stripped)
            if header is not None and declared_n is None:
                declared_n = int(header.group(1))
            continue
        fields = stripped.split()
        if len(fields) != 2:
            raise NetgenException("{0}: line {1}: expected two node ids, got {2!r}".format(path, lineno, stripped))
        try:
            raw_pairs.append((int(fields[0]), int(fields[1])))
        except ValueError:
            raise NetgenException("{0}: line {1}: node ids must be integers, got {2!r}".format(path, lineno, stripped))

    if declared_n is not None:
        if declared_n < 1:
            raise NetgenException("{0}: declared node count must be positive".format(path))
        for u, v in raw_pairs:
            if min(u, v) < 0 or max(u, v) >= declared_n:
                raise NetgenException("{0}: edge ({1}, {2}) outside the declared n={3}".format(path, u, v, declared_n))
        return Graph(declared_n, np.array(raw_pairs, dtype=np.int64).reshape(-1, 2))

    node_ids = {}
    pairs = []
    for u, v in raw_pairs:
        for node in (u, v):
            if node not in node_ids:
                node_ids[node] = len(node_ids)
        pairs.append((node_ids[u], node_ids[v]))

    if len(node_ids) == 0:
        raise NetgenException("{0}: no edges found".format(path))
    return Graph(len(node_ids), np.array(pairs, dtype=np.int64).reshape(-1, 2))


def save_edge_list(graph, path):
    """
    Writes the graph in the edge-list text format, preceded by a format-version
    comment and the node count, so nodes without edges survive a reload.

    Args:
        graph (outbreakpred.netgen.Graph): graph to save
        path (str): output filepath
    """
    with open(path, "w") as f:
        f.write("# outbreakpred format-version {0}\n".format(outbreakpred.format_version))
        f.write("# n={0} edges={1}\n".format(graph.n, graph.num_edges))
        for u, v in graph.edges:
            f.write("{0} {1}\n".format(u, v))


def build_network(spec):
    """
    Builds the graph described by a NetworkSpec

    Args:
        spec (outbreakpred.netgen.NetworkSpec): what to build

    Returns:
        outbreakpred.netgen.Graph: the graph
    """
    kind = spec.kind.upper()
    if kind == "ER":
        return generate_er(spec.n, spec.avg_degree, spec.rng_seed)
    elif kind == "BA":
        return generate_ba(spec.n, spec.m, spec.rng_seed)
    elif kind == "WS":
        return generate_ws(spec.n, spec.k, spec.p, spec.rng_seed)
    elif kind == "FILE":
        return load_edge_list(spec.path)
    else:
        raise NetgenException("unknown network kind {0}".format(spec.kind))


def laplacian(graph):
    """
    Unnormalized combinatorial Laplacian L = D - A

    Args:
        graph (outbreakpred.netgen.Graph): non-empty graph

    Returns:
        scipy.sparse.csr_matrix: symmetric int64 Laplacian with zero row sums
    """
    adj = graph.adjacency()
    lap = sparse.diags(graph.degrees.astype(np.int64), format="csr", dtype=np.int64) - adj
    lap.sort_indices()
    return lap.tocsr()


def degree_stats(graph):
    """
    Summary of the degree sequence

    Args:
        graph (outbreakpred.netgen.Graph): the graph

    Returns:
        dict: n, edges, avg_degree, max_degree, min_degree, isolated
    """
    degrees = graph.degrees
    return {
        "n": graph.n,
        "edges": graph.num_edges,
        "avg_degree": float(graph.avg_degree),
        "max_degree": int(degrees.max()),
        "min_degree": int(degrees.min()),
        "isolated": int(np.sum(degrees == 0)),
    }
