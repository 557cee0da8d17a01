"""
SIR dynamics: the deterministic reference model (RK4) and the discrete-time stochastic
network process that produces take-off / die-out trajectories, plus batch execution
with reproducible per-run random streams.
"""
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.signal

import outbreakpred
import outbreakpred.check as check


class SimException(Exception):
    """Exception class for the sim module."""


class DivergenceError(SimException):
    """Raised when the ODE integration produces a non-finite state."""


# low / medium / high infectivity scenarios and observation grids used in the
# take-off prediction experiments (BA m=3 and ER <k>=5, N=10^4)
infectivity_presets = {
    "BA": {"m": 3, "beta": {"low": 0.015, "medium": 0.02, "high": 0.03}, "t_o": [10, 15, 20, 25, 30]},
    "ER": {"avg_degree": 5, "beta": {"low": 0.03, "medium": 0.033, "high": 0.04}, "t_o": [28, 36, 43, 51, 58]},
}


@dataclass(frozen=True)
class SirParams:
    """
    Per-step SIR probabilities (N is carried by the graph)

    Args:
        beta (float): per-contact per-step transmission probability in [0, 1]
        mu (float): per-step recovery probability in (0, 1]
    """
    beta: float
    mu: float = 0.1

    def __post_init__(self):
        check.probability(self.beta, "beta", SimException)
        check.probability(self.mu, "mu", SimException, allow_zero=False)


@dataclass(frozen=True)
class SimConfig:
    """
    Settings of a stochastic run

    Args:
        max_steps (int): hard cap on simulated steps
        initial_infected (int): number of seed nodes
        seed_selection (str or int): "uniform" for uniformly random seeds, or a node id (FixedNode)
        master_seed (int): 64-bit seed from which every run stream is derived
    """
    max_steps: int = 1000
    initial_infected: int = 1
    seed_selection: object = "uniform"
    master_seed: int = 0

    def __post_init__(self):
        check.positive_scalar_integer(self.max_steps, "max_steps", SimException)
        check.positive_scalar_integer(self.initial_infected, "initial_infected", SimException)
        check.nonnegative_scalar_integer(self.master_seed, "master_seed", SimException)
        if isinstance(self.seed_selection, str):
            if self.seed_selection != "uniform":
                raise SimException("seed_selection must be 'uniform' or a node id")
        else:
            check.nonnegative_scalar_integer(self.seed_selection, "seed_selection", SimException)
            if self.initial_infected != 1:
                raise SimException("a fixed seed node implies initial_infected = 1")

    @classmethod
    def default(cls, **kwargs):
        """
        SimConfig with max_steps taken from the package configuration

        Returns:
            outbreakpred.sim.SimConfig: the config
        """
        kwargs.setdefault("max_steps", outbreakpred.default_max_steps)
        return cls(**kwargs)


class Trajectory():
    """
    Per-step compartment counts of one stochastic run

    Args:
        counts (np.array): (t_end+1, 3) int array of (s, i, r) per step

    Attributes:
        counts (np.array): the counts
        t_end (int): termination step
        final_r (int): recovered count at termination
    """
    def __init__(self, counts):
        self.counts = np.asarray(counts, dtype=np.int64).reshape(-1, 3)
        self.t_end = self.counts.shape[0] - 1
        self.final_r = int(self.counts[-1, 2])

    @property
    def s(self):
        return self.counts[:, 0]

    @property
    def i(self):
        return self.counts[:, 1]

    @property
    def r(self):
        return self.counts[:, 2]

    @property
    def n_nodes(self):
        return int(self.counts[0].sum())


class TransmissionRecord():
    """
    Who-infected-whom record of one stochastic run

    Args:
        seed_nodes (array_like): initially infected node ids
        infections (array_like): (K, 3) rows of (step, infectee, infector)
        recoveries (array_like): (R, 2) rows of (step, node)
    """
    def __init__(self, seed_nodes, infections, recoveries):
        self.seed_nodes = np.asarray(seed_nodes, dtype=np.int64).reshape(-1)
        self.infections = np.asarray(infections, dtype=np.int64).reshape(-1, 3)
        self.recoveries = np.asarray(recoveries, dtype=np.int64).reshape(-1, 2)

    def infected_by(self, t_k):
        """
        Nodes infected up to and including step t_k (seeds first, then in event order)

        Args:
            t_k (int): step

        Returns:
            np.array: node ids
        """
        later = self.infections[self.infections[:, 0] <= t_k, 1]
        return np.concatenate([self.seed_nodes, later])

    def transmission_graph(self, t_k):
        """
        Directed transmission graph G(t_k): infector -> infectee edges of all
        infections that happened at or before step t_k

        Args:
            t_k (int): step

        Returns:
            tuple:
                nodes (np.array): infected node ids up to t_k
                edges (np.array): (E, 2) rows of (infector, infectee)
        """
        mask = self.infections[:, 0] <= t_k
        edges = self.infections[mask][:, [2, 1]]
        return self.infected_by(t_k), edges


class OdeTrajectory():
    """
    Sampled solution of the deterministic SIR model

    Args:
        t (np.array): sample times
        S, I, R (np.array): compartment sizes at the sample times
        dt (float): integration step
    """
    def __init__(self, t, S, I, R, dt):
        self.t = np.asarray(t, dtype=np.float64)
        self.S = np.asarray(S, dtype=np.float64)
        self.I = np.asarray(I, dtype=np.float64)
        self.R = np.asarray(R, dtype=np.float64)
        self.dt = dt

    def to_dataframe(self):
        return pd.DataFrame({"t": self.t, "S": self.S, "I": self.I, "R": self.R})


def _sir_rhs(state, beta, mu, N):
    S, I, _ = state
    infection = beta * S * I / N
    return np.array([-infection, infection - mu * I, mu * I])


def run_deterministic_sir(beta, mu, N, i0, t_end, dt, output_every=None):
    """
    Integrates dS/dt = -beta S I / N, dI/dt = beta S I / N - mu I, dR/dt = mu I with classic RK4.

    Args:
        beta (float): transmission rate (>= 0)
        mu (float): recovery rate (>= 0)
        N (float): population size
        i0 (float): initial infectious, 0 < i0 < N
        t_end (float): integration horizon
        dt (float): integration step (> 0)
        output_every (int): number of steps between samples. Defaults to one sample per unit time.

    Returns:
        outbreakpred.sim.OdeTrajectory: the sampled solution
    """
    check.real_nonnegative_scalar(beta, "beta", SimException)
    check.real_nonnegative_scalar(mu, "mu", SimException)
    check.real_positive_scalar(N, "N", SimException)
    check.real_positive_scalar(dt, "dt", SimException)
    check.real_nonnegative_scalar(t_end, "t_end", SimException)
    check.real_positive_scalar(i0, "i0", SimException)
    if i0 >= N:
        raise SimException("i0 must be smaller than N")
    if output_every is None:
        output_every = max(1, int(round(1.0 / dt)))

    n_steps = int(round(t_end / dt))
    state = np.array([N - i0, i0, 0.0], dtype=np.float64)
    samples = [state.copy()]
    times = [0.0]
    for step in range(1, n_steps + 1):
        k1 = _sir_rhs(state, beta, mu, N)
        k2 = _sir_rhs(state + 0.5 * dt * k1, beta, mu, N)
        k3 = _sir_rhs(state + 0.5 * dt * k2, beta, mu, N)
        k4 = _sir_rhs(state + dt * k3, beta, mu, N)
        state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise DivergenceError("ODE state became non-finite at step {0} (t={1})".format(step, step * dt))
        if step % output_every == 0 or step == n_steps:
            samples.append(state.copy())
            times.append(step * dt)

    samples = np.array(samples)
    return OdeTrajectory(times, samples[:, 0], samples[:, 1], samples[:, 2], dt)


def run_rng(master_seed, run_index):
    """
    Counter-based random stream of one run. The stream depends only on
    (master_seed, run_index), never on which worker executes the run.

    Args:
        master_seed (int): batch seed
        run_index (int): run index

    Returns:
        np.random.Generator: Philox-backed generator
    """
    seed_seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(run_index),))
    return np.random.Generator(np.random.Philox(seed_seq))


def _pick_seeds(graph, config, rng):
    if config.initial_infected >= graph.n:
        raise SimException("initial_infected must be smaller than the node count")
    if isinstance(config.seed_selection, str):
        return np.sort(rng.choice(graph.n, size=config.initial_infected, replace=False)).astype(np.int64)
    if config.seed_selection >= graph.n:
        raise SimException("fixed seed node {0} is not in the graph".format(config.seed_selection))
    return np.array([config.seed_selection], dtype=np.int64)


def run_stochastic_sir(graph, params, config, run_index):
    """
    One synchronous discrete-time SIR run on a graph.

    Within step t -> t+1, every node infectious at the start of the step
    independently infects each susceptible neighbor with probability beta; then
    every node infectious at the start of the step recovers with probability mu.
    Nodes infected during the step are infectious from step t+1 on. A node hit by
    several infectors in the same step is credited to the lowest infector id.
    The run stops when nobody is infectious or max_steps is reached.

    Args:
        graph (outbreakpred.netgen.Graph): contact network
        params (outbreakpred.sim.SirParams): beta and mu
        config (outbreakpred.sim.SimConfig): run settings
        run_index (int): index of the run; selects the random stream

    Returns:
        tuple:
            trajectory (outbreakpred.sim.Trajectory): per-step counts
            record (outbreakpred.sim.TransmissionRecord): infection and recovery events
    """
    rng = run_rng(config.master_seed, run_index)
    n = graph.n
    indptr = graph.indptr
    indices = graph.indices

    # 0 susceptible, 1 infectious, 2 recovered
    state = np.zeros(n, dtype=np.int8)
    seeds = _pick_seeds(graph, config, rng)
    state[seeds] = 1
    infectious = seeds.copy()

    counts = [(n - seeds.size, seeds.size, 0)]
    infection_events = []
    recovery_events = []
    s_count, i_count, r_count = n - seeds.size, seeds.size, 0

    t = 0
    while infectious.size > 0 and t < config.max_steps:
        # transmissions along every infectious -> susceptible edge
        starts = indptr[infectious]
        degs = indptr[infectious + 1] - starts
        total = int(degs.sum())
        new_nodes = np.zeros(0, dtype=np.int64)
        infectors = np.zeros(0, dtype=np.int64)
        if total > 0:
            src = np.repeat(infectious, degs)
            offsets = np.arange(total) - np.repeat(np.cumsum(degs) - degs, degs)
            dst = indices[np.repeat(starts, degs) + offsets]
            susceptible = state[dst] == 0
            src = src[susceptible]
            dst = dst[susceptible]
            hits = rng.random(dst.size) < params.beta
            if np.any(hits):
                new_nodes, first = np.unique(dst[hits], return_index=True)
                infectors = src[hits][first]

        # recoveries of the nodes infectious at the start of the step
        recovered_mask = rng.random(infectious.size) < params.mu
        recovered = infectious[recovered_mask]

        t += 1
        state[new_nodes] = 1
        state[recovered] = 2
        infectious = np.sort(np.concatenate([infectious[~recovered_mask], new_nodes]))

        if new_nodes.size:
            infection_events.append(np.column_stack([np.full(new_nodes.size, t), new_nodes, infectors]))
        if recovered.size:
            recovery_events.append(np.column_stack([np.full(recovered.size, t), recovered]))
        s_count -= new_nodes.size
        i_count += new_nodes.size - recovered.size
        r_count += recovered.size
        counts.append((s_count, i_count, r_count))

    if infectious.size > 0:
        warnings.warn("run {0} reached max_steps={1} with {2} nodes still infectious".format(
            run_index, config.max_steps, infectious.size))

    infections = np.concatenate(infection_events) if infection_events else np.zeros((0, 3), dtype=np.int64)
    recoveries = np.concatenate(recovery_events) if recovery_events else np.zeros((0, 2), dtype=np.int64)
    return Trajectory(np.array(counts)), TransmissionRecord(seeds, infections, recoveries)


class BatchResult():
    """
    Ordered collection of stochastic runs sharing graph, parameters and master seed

    Args:
        n_nodes (int): network size N
        params (outbreakpred.sim.SirParams): parameters of every run
        config (outbreakpred.sim.SimConfig): run settings
        runs (list): (Trajectory, TransmissionRecord) pairs ordered by run index
        graph_hash (str): content hash of the network the runs were simulated on
        network (dict): optional NetworkSpec dict for provenance

    Attributes:
        final_sizes (np.array): final_r of every run, ordered by run index
    """
    def __init__(self, n_nodes, params, config, runs, graph_hash="", network=None):
        self.n_nodes = int(n_nodes)
        self.params = params
        self.config = config
        self.runs = list(runs)
        self.graph_hash = graph_hash
        self.network = network if network is not None else {}
        self.final_sizes = np.array([traj.final_r for traj, _ in self.runs], dtype=np.int64)

    def __len__(self):
        return len(self.runs)

    def __iter__(self):
        return self.runs.__iter__()

    def __getitem__(self, index):
        return self.runs[index]

    def header(self):
        """
        Provenance header written as the first JSONL line

        Returns:
            dict: header fields
        """
        return {
            "format_version": outbreakpred.format_version,
            "kind": "trajectories",
            "n_nodes": self.n_nodes,
            "beta": self.params.beta,
            "mu": self.params.mu,
            "max_steps": self.config.max_steps,
            "initial_infected": self.config.initial_infected,
            "seed_selection": self.config.seed_selection,
            "master_seed": self.config.master_seed,
            "graph_hash": self.graph_hash,
            "network": self.network,
        }

    def save(self, filepath):
        """
        Writes the batch as JSONL: header line, then one run per line

        Args:
            filepath (str): output path
        """
        with open(filepath, "w") as f:
            f.write(json.dumps(self.header()) + "\n")
            for run_id, (traj, record) in enumerate(self.runs):
                line = {
                    "run_id": run_id,
                    "seed_nodes": record.seed_nodes.tolist(),
                    "beta": self.params.beta,
                    "mu": self.params.mu,
                    "t_end": traj.t_end,
                    "final_r": traj.final_r,
                    "counts": traj.counts.tolist(),
                    "infections": record.infections.tolist(),
                    "recoveries": record.recoveries.tolist(),
                }
                f.write(json.dumps(line) + "\n")

    @classmethod
    def load(cls, filepath):
        """
        Reads a batch written by save()

        Args:
            filepath (str): JSONL path

        Returns:
            outbreakpred.sim.BatchResult: the batch
        """
        with open(filepath, "r") as f:
            header = json.loads(f.readline())
            if header.get("kind") != "trajectories":
                raise SimException("{0} is not a trajectory file".format(filepath))
            if header.get("format_version") != outbreakpred.format_version:
                raise SimException("{0} has format version {1}, expected {2}".format(
                    filepath, header.get("format_version"), outbreakpred.format_version))
            runs = []
            for line in f:
                if len(line.strip()) == 0:
                    continue
                entry = json.loads(line)
                traj = Trajectory(entry["counts"])
                record = TransmissionRecord(entry["seed_nodes"], entry["infections"], entry["recoveries"])
                runs.append((traj, record))
        params = SirParams(header["beta"], header["mu"])
        config = SimConfig(max_steps=header["max_steps"], initial_infected=header["initial_infected"],
                           seed_selection=header["seed_selection"], master_seed=header["master_seed"])
        return cls(header["n_nodes"], params, config, runs, graph_hash=header["graph_hash"],
                   network=header.get("network", {}))


def _run_chunk(args):
    graph, params, config, run_indices = args
    return [run_stochastic_sir(graph, params, config, idx) for idx in run_indices]


def run_batch(graph, params, config, n_runs, n_workers=None, network=None):
    """
    Runs n_runs independent simulations with run_index = 0..n_runs-1.
    The result is ordered by run index and identical for any worker count.

    Args:
        graph (outbreakpred.netgen.Graph): contact network
        params (outbreakpred.sim.SirParams): parameters
        config (outbreakpred.sim.SimConfig): settings incl. master seed
        n_runs (int): number of runs (>= 1)
        n_workers (int): worker processes. Defaults to the configured value.
        network (dict): optional NetworkSpec dict stored as provenance

    Returns:
        outbreakpred.sim.BatchResult: all runs
    """
    check.positive_scalar_integer(n_runs, "n_runs", SimException)
    if n_workers is None:
        n_workers = outbreakpred.n_workers
    check.positive_scalar_integer(n_workers, "n_workers", SimException)

    if n_workers == 1 or n_runs == 1:
        runs = _run_chunk((graph, params, config, range(n_runs)))
    else:
        chunks = np.array_split(np.arange(n_runs), min(n_runs, 4 * n_workers))
        jobs = [(graph, params, config, chunk.tolist()) for chunk in chunks if chunk.size]
        runs = []
        with ProcessPoolExecutor(max_workers=n_workers) as executor:
            for chunk_runs in executor.map(_run_chunk, jobs):
                runs.extend(chunk_runs)

    return BatchResult(graph.n, params, config, runs, graph_hash=graph.hash(), network=network)


def default_bin_width(n_nodes):
    """
    Bin width used when none is given: about 100 bins over [0, N]

    Args:
        n_nodes (int): network size

    Returns:
        int: bin width (>= 1)
    """
    return max(1, int(n_nodes) // 100)


class Histogram():
    """
    Final-size histogram over [0, N]

    Args:
        bin_starts (np.array): left edge of every bin
        counts (np.array): runs per bin
        bin_width (int): width of every bin

    Attributes:
        bin_starts (np.array): left edges
        counts (np.array): counts
        bin_width (int): width
    """
    def __init__(self, bin_starts, counts, bin_width):
        self.bin_starts = np.asarray(bin_starts, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.bin_width = int(bin_width)

    def to_dict(self):
        """
        Non-empty bins

        Returns:
            dict: bin start -> count
        """
        nonzero = np.nonzero(self.counts)[0]
        return {int(self.bin_starts[i]): int(self.counts[i]) for i in nonzero}

    def smoothed(self, window=5):
        """
        Moving average of the counts (zero padded at both ends)

        Args:
            window (int): window length in bins

        Returns:
            np.array: smoothed density, same length as counts
        """
        check.positive_scalar_integer(window, "window", SimException)
        if self.counts.size == 0:
            return np.zeros(0)
        kernel = np.ones(window) / window
        # centered slice of the full convolution, also when there are fewer bins than the window
        full = np.convolve(self.counts.astype(np.float64), kernel, mode="full")
        start = (window - 1) // 2
        return full[start:start + self.counts.size]

    def peaks(self, window=5, min_prominence=0.05):
        """
        Local maxima of the smoothed histogram with their prominences. Peaks whose
        prominence is below min_prominence times the highest smoothed value are
        treated as sampling jitter. Edge bins can be peaks.

        Args:
            window (int): smoothing window in bins
            min_prominence (float): relative prominence threshold

        Returns:
            tuple:
                indices (np.array): bin indices of the peaks, ascending
                prominences (np.array): prominence of every peak
        """
        smooth = self.smoothed(window)
        if smooth.size == 0 or smooth.max() <= 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        padded = np.concatenate([[0.0], smooth, [0.0]])
        found, props = scipy.signal.find_peaks(padded, prominence=min_prominence * smooth.max())
        return (found - 1).astype(np.int64), props["prominences"]

    def modes(self, window=5, min_prominence=0.05):
        """
        Bin indices of the modes of the smoothed histogram (see peaks())
        """
        return self.peaks(window, min_prominence)[0]

    def is_bimodal(self, window=5, min_prominence=0.05):
        return self.modes(window, min_prominence).size >= 2

    def to_dataframe(self):
        return pd.DataFrame({"bin_start": self.bin_starts, "count": self.counts})

    def to_csv(self, filepath):
        """
        Writes `bin_start,count` CSV preceded by a format-version comment

        Args:
            filepath (str): output path
        """
        with open(filepath, "w") as f:
            f.write("# outbreakpred format-version {0}\n".format(outbreakpred.format_version))
            self.to_dataframe().to_csv(f, index=False)

    @classmethod
    def from_csv(cls, filepath):
        df = pd.read_csv(filepath, comment="#")
        starts = df["bin_start"].to_numpy()
        width = int(starts[1] - starts[0]) if len(starts) > 1 else 1
        return cls(starts, df["count"].to_numpy(), width)


def final_size_histogram(batch, bin_width=None, n_nodes=None):
    """
    Counts of final_r per bin over [0, N]

    Args:
        batch (outbreakpred.sim.BatchResult or array_like): a batch, or raw final sizes
        bin_width (int): bin width (>= 1). Defaults to default_bin_width(N).
        n_nodes (int): N, required when raw final sizes are passed

    Returns:
        outbreakpred.sim.Histogram: the histogram
    """
    if isinstance(batch, BatchResult):
        sizes = batch.final_sizes
        n_nodes = batch.n_nodes
    else:
        sizes = np.asarray(batch, dtype=np.int64).reshape(-1)
        if n_nodes is None:
            n_nodes = int(sizes.max()) if sizes.size else 0
    if sizes.size == 0:
        raise SimException("cannot build a histogram of an empty batch")
    if bin_width is None:
        bin_width = default_bin_width(n_nodes)
    check.positive_scalar_integer(bin_width, "bin_width", SimException)

    n_bins = n_nodes // bin_width + 1
    counts = np.bincount(sizes // bin_width, minlength=n_bins)
    return Histogram(np.arange(n_bins) * bin_width, counts, bin_width)


def estimate_dieout_prob(batch, phi_star):
    """
    Fraction of runs whose final size stays below phi_star

    Args:
        batch (outbreakpred.sim.BatchResult): the batch
        phi_star (float): outbreak threshold, 0 < phi_star < N

    Returns:
        float: die-out probability estimate
    """
    if len(batch) == 0:
        raise SimException("cannot estimate a probability from an empty batch")
    check.real_positive_scalar(phi_star, "phi_star", SimException)
    if phi_star >= batch.n_nodes:
        raise SimException("phi_star must be smaller than N = {0}".format(batch.n_nodes))
    return float(np.mean(batch.final_sizes < phi_star))


def transmissibility(params):
    """
    Probability that an infectious node transmits across a given edge before recovering
    under the synchronous per-step scheme: T = beta / (1 - (1 - beta)(1 - mu))

    Args:
        params (outbreakpred.sim.SirParams): parameters

    Returns:
        float: T
    """
    return params.beta / (1.0 - (1.0 - params.beta) * (1.0 - params.mu))


def branching_dieout_prob(mean_offspring, tol=1e-14, max_iter=1000000):
    """
    Extinction probability of a branching process with Poisson(mean_offspring)
    offspring: the smallest root of q = exp(R (q - 1)), found by fixed-point
    iteration from q = 0.

    Args:
        mean_offspring (float): R = <k> T
        tol (float): convergence tolerance
        max_iter (int): iteration cap

    Returns:
        float: q
    """
    check.real_nonnegative_scalar(mean_offspring, "mean_offspring", SimException)
    if mean_offspring <= 1:
        return 1.0
    q = 0.0
    for _ in range(max_iter):
        q_next = np.exp(mean_offspring * (q - 1.0))
        if abs(q_next - q) < tol:
            return float(q_next)
        q = q_next
    return float(q)


def cumulative_at(record, t_o):
    """
    Cumulative infections (seeds included) observed at step t_o

    Args:
        record (outbreakpred.sim.TransmissionRecord): the run's events
        t_o (int): observation step

    Returns:
        int: count
    """
    return int(record.seed_nodes.size + np.sum(record.infections[:, 0] <= t_o))


def conditional_takeoff_curve(batch, phi_star, t_o):
    """
    Probability of take-off conditioned on the cumulative infection count observed at t_o

    Args:
        batch (outbreakpred.sim.BatchResult): the batch
        phi_star (float): outbreak threshold
        t_o (int): observation step

    Returns:
        pandas.DataFrame: columns cum_count, n_runs, p_takeoff (sorted by cum_count)
    """
    if len(batch) == 0:
        raise SimException("cannot build a curve from an empty batch")
    observed = np.array([cumulative_at(record, t_o) for _, record in batch])
    takeoff = (batch.final_sizes >= phi_star).astype(np.float64)
    df = pd.DataFrame({"cum_count": observed, "takeoff": takeoff})
    grouped = df.groupby("cum_count")["takeoff"].agg(["count", "mean"]).reset_index()
    grouped.columns = ["cum_count", "n_runs", "p_takeoff"]
    return grouped


def sample_trajectories(batch, n):
    """
    First n trajectories of a batch as a long table, for trajectory plots

    Args:
        batch (outbreakpred.sim.BatchResult): the batch
        n (int): number of runs to include

    Returns:
        pandas.DataFrame: columns run_id, t, s, i, r
    """
    frames = []
    for run_id, (traj, _) in enumerate(batch.runs[:n]):
        frames.append(pd.DataFrame({"run_id": run_id, "t": np.arange(traj.t_end + 1),
                                    "s": traj.s, "i": traj.i, "r": traj.r}))
    if len(frames) == 0:
        return pd.DataFrame(columns=["run_id", "t", "s", "i", "r"], dtype=np.int64)
    return pd.concat(frames, ignore_index=True)
