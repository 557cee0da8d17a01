"""
Small synthetic graphs, batches and datasets for tests and examples
"""
import os

import numpy as np

import outbreakpred.netgen as netgen
import outbreakpred.sim as sim
import outbreakpred.dataset as dataset


def create_path_graph(n):
    return netgen.Graph(n, [(i, i + 1) for i in range(n - 1)])


def create_cycle_graph(n):
    return netgen.Graph(n, [(i, (i + 1) % n) for i in range(n)])


def create_star_graph(n_leaves):
    """
    Node 0 is the hub; nodes 1..n_leaves are the leaves
    """
    return netgen.Graph(n_leaves + 1, [(0, i) for i in range(1, n_leaves + 1)])


def create_complete_graph(n):
    return netgen.Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def create_two_copies(graph):
    """
    Disjoint union of a graph with itself; node v of the copy is v + graph.n

    Args:
        graph (outbreakpred.netgen.Graph): graph to duplicate

    Returns:
        outbreakpred.netgen.Graph: 2n-node graph
    """
    edges = np.asarray(graph.edges)
    return netgen.Graph(2 * graph.n, np.concatenate([edges, edges + graph.n]))


def create_bimodal_batch(n=300, runs=400, master_seed=0, filedir=None):
    """
    Batch on ER(n, <k>=5) with mu = 1 and beta = 0.4 (mean offspring 2),
    whose final sizes split into a die-out and a take-off branch

    Args:
        n (int): node count
        runs (int): number of runs
        master_seed (int): simulation seed
        filedir (str): if set, the edge list and trajectories are written there

    Returns:
        tuple:
            graph (outbreakpred.netgen.Graph): the network
            batch (outbreakpred.sim.BatchResult): the runs
    """
    graph = netgen.generate_er(n, 5.0, 3)
    if filedir is not None:
        # runs must refer to the node ids of the written edge list
        os.makedirs(filedir, exist_ok=True)
        netgen.save_edge_list(graph, os.path.join(filedir, "network.txt"))
        graph = netgen.load_edge_list(os.path.join(filedir, "network.txt"))
    params = sim.SirParams(0.4, 1.0)
    config = sim.SimConfig(max_steps=500, master_seed=master_seed)
    batch = sim.run_batch(graph, params, config, runs, n_workers=1,
                          network={"kind": "ER", "n": n, "avg_degree": 5.0, "rng_seed": 3})
    if filedir is not None:
        batch.save(os.path.join(filedir, "trajectories.jsonl"))
    return graph, batch


def create_toy_dataset(n_samples=200, t_o=8, n_nodes=50, seed=0, filedir=None):
    """
    Separable synthetic observations without running a simulation: take-off
    samples keep producing new cases, die-out samples stop after a few steps.
    Infected node ids are drawn from an ER graph so OGWN can encode them.

    Args:
        n_samples (int): number of samples (both classes are always present)
        t_o (int): observation step
        n_nodes (int): nodes of the accompanying graph
        seed (int): generator seed
        filedir (str): if set, the graph and dataset are written there

    Returns:
        tuple:
            graph (outbreakpred.netgen.Graph): the graph
            ds (outbreakpred.dataset.Dataset): the dataset
    """
    rng = np.random.default_rng(seed)
    graph = netgen.generate_er(n_nodes, 4.0, seed)
    if filedir is not None:
        os.makedirs(filedir, exist_ok=True)
        netgen.save_edge_list(graph, os.path.join(filedir, "toy_network.txt"))
        graph = netgen.load_edge_list(os.path.join(filedir, "toy_network.txt"))
    n_nodes = graph.n
    samples = []
    for i in range(n_samples):
        takeoff = i % 2
        if takeoff:
            rates = 1.0 + 0.4 * np.arange(t_o + 1)
        else:
            rates = np.where(np.arange(t_o + 1) < 3, 1.0, 0.05)
        new_counts = np.minimum(rng.poisson(rates), n_nodes // 4)
        new_counts[0] = 0
        cum_counts = 1 + np.cumsum(new_counts)
        infected = [rng.choice(n_nodes, size=c, replace=False) for c in new_counts]
        seed_node = [int(rng.integers(n_nodes))]
        observed = dataset.ObservedSequence(t_o, cum_counts, new_counts, infected, seed_node)
        final_r = int(cum_counts[-1]) + (n_nodes if takeoff else 0)
        samples.append(dataset.LabeledSample(i, observed, takeoff, final_r))
    labels = np.array([s.label for s in samples])
    splits = dataset.stratified_split(labels, (0.6, 0.2, 0.2), seed)
    ds = dataset.Dataset(samples, splits, {"graph_hash": graph.hash(), "t_o": t_o, "phi_star": n_nodes / 2})
    if filedir is not None:
        ds.save(os.path.join(filedir, "toy_dataset.jsonl"))
    return graph, ds
