"""
Turns simulated runs into labeled observation samples: label by final size,
truncate the transmission record at the observation step, split, and serialize.
"""
import json
from dataclasses import dataclass

import numpy as np

import outbreakpred
import outbreakpred.check as check
import outbreakpred.sim as sim


class DatasetException(Exception):
    """Exception class for the dataset module."""


class UnimodalError(DatasetException):
    """Raised when a final-size distribution has no separate take-off branch."""


split_names = ("train", "validation", "test")


def label(final_r, phi_star):
    """
    Outbreak label of a run: 1 if final_r >= phi_star else 0

    Args:
        final_r (int): final recovered count
        phi_star (float): outbreak threshold (> 0)

    Returns:
        int: 0 (die-out) or 1 (take-off)
    """
    check.real_positive_scalar(phi_star, "phi_star", DatasetException)
    return 1 if final_r >= phi_star else 0


def auto_phi_star(batch, bin_width=None, window=5, min_prominence=0.05):
    """
    Outbreak threshold at the valley of the final-size histogram: the bin start
    with the lowest smoothed density strictly between the two most prominent
    modes. Ties go to the smaller bin.

    Args:
        batch (outbreakpred.sim.BatchResult or array_like): batch or raw final sizes
        bin_width (int): histogram bin width. Defaults to sim.default_bin_width(N).
        window (int): smoothing window in bins
        min_prominence (float): relative prominence below which peaks are ignored

    Returns:
        int: phi_star
    """
    hist = sim.final_size_histogram(batch, bin_width=bin_width)
    peaks, prominences = hist.peaks(window, min_prominence)
    if peaks.size < 2:
        raise UnimodalError("final-size histogram has {0} mode(s); cannot place a take-off threshold".format(
            peaks.size))
    # stable sort keeps the lower bin first among equally prominent peaks
    top = np.sort(peaks[np.argsort(-prominences, kind="stable")[:2]])
    lo, hi = top
    if hi - lo < 2:
        raise UnimodalError("the two modes are adjacent bins; no valley between them")
    smooth = hist.smoothed(window)
    valley = lo + 1 + int(np.argmin(smooth[lo + 1:hi]))
    return int(hist.bin_starts[valley])


@dataclass(frozen=True)
class LabelingConfig:
    """
    How runs are labeled

    Args:
        phi_star (float): explicit outbreak threshold, or None
        auto_phi (bool): derive phi_star from the histogram valley
    """
    phi_star: float = None
    auto_phi: bool = False

    def __post_init__(self):
        if self.phi_star is None and not self.auto_phi:
            raise DatasetException("either phi_star or auto_phi must be set")
        if self.phi_star is not None:
            check.real_positive_scalar(self.phi_star, "phi_star", DatasetException)

    def resolve(self, batch):
        """
        The threshold to use for a batch

        Args:
            batch (outbreakpred.sim.BatchResult): the batch

        Returns:
            float: phi_star
        """
        if self.phi_star is not None:
            if self.phi_star >= batch.n_nodes:
                raise DatasetException("phi_star must be smaller than N = {0}".format(batch.n_nodes))
            return self.phi_star
        return auto_phi_star(batch)


class ObservedSequence():
    """
    What a predictor sees of one run up to the observation step t_o

    Args:
        t_o (int): observation horizon
        cum_counts (array_like): cumulative infections (seeds included) at steps 0..t_o
        new_counts (array_like): infections during steps 0..t_o (0 at step 0)
        infected_nodes (list): per step, ids of nodes infected in that step
        seed_nodes (array_like): initially infected nodes

    Attributes:
        t_o (int): horizon
        cum_counts (np.array): cumulative counts
        new_counts (np.array): new counts
        infected_nodes (list of np.array): node ids per step
        seed_nodes (np.array): seeds
    """
    def __init__(self, t_o, cum_counts, new_counts, infected_nodes, seed_nodes):
        self.t_o = int(t_o)
        self.cum_counts = np.asarray(cum_counts, dtype=np.int64)
        self.new_counts = np.asarray(new_counts, dtype=np.int64)
        self.infected_nodes = [np.asarray(nodes, dtype=np.int64) for nodes in infected_nodes]
        self.seed_nodes = np.asarray(seed_nodes, dtype=np.int64)
        if not (self.cum_counts.size == self.new_counts.size == len(self.infected_nodes) == self.t_o + 1):
            raise DatasetException("observed sequence fields must all have t_o + 1 = {0} steps".format(self.t_o + 1))

    @property
    def final_count(self):
        """Cumulative infections at t_o"""
        return int(self.cum_counts[-1])

    def truncate(self, t_o):
        """
        Restricts the sequence to steps <= t_o

        Args:
            t_o (int): new horizon, at most the current one

        Returns:
            outbreakpred.dataset.ObservedSequence: the shorter sequence
        """
        check.nonnegative_scalar_integer(t_o, "t_o", DatasetException)
        if t_o > self.t_o:
            raise DatasetException("cannot extend an observed sequence from t_o={0} to {1}".format(self.t_o, t_o))
        return ObservedSequence(t_o, self.cum_counts[:t_o + 1], self.new_counts[:t_o + 1],
                                self.infected_nodes[:t_o + 1], self.seed_nodes)

    def __eq__(self, other):
        if not isinstance(other, ObservedSequence):
            return NotImplemented
        return (self.t_o == other.t_o and np.array_equal(self.cum_counts, other.cum_counts)
                and np.array_equal(self.new_counts, other.new_counts)
                and np.array_equal(self.seed_nodes, other.seed_nodes)
                and all(np.array_equal(a, b) for a, b in zip(self.infected_nodes, other.infected_nodes)))


def truncate(trajectory, record, t_o):
    """
    Observation of a run up to step t_o. When the run ended before t_o the
    remaining steps carry zero new infections.

    Args:
        trajectory (outbreakpred.sim.Trajectory): the run's counts
        record (outbreakpred.sim.TransmissionRecord): the run's events
        t_o (int): observation step (>= 0)

    Returns:
        outbreakpred.dataset.ObservedSequence: the observation
    """
    check.nonnegative_scalar_integer(t_o, "t_o", DatasetException)
    if record.seed_nodes.size != trajectory.i[0]:
        raise DatasetException("transmission record does not belong to this trajectory")

    steps = record.infections[:, 0]
    visible = record.infections[steps <= t_o]
    new_counts = np.bincount(visible[:, 0], minlength=t_o + 1)[:t_o + 1].astype(np.int64)
    new_counts[0] = 0
    cum_counts = record.seed_nodes.size + np.cumsum(new_counts)
    infected_nodes = [visible[visible[:, 0] == t, 1] for t in range(t_o + 1)]
    return ObservedSequence(t_o, cum_counts, new_counts, infected_nodes, record.seed_nodes)


class LabeledSample():
    """
    One labeled observation

    Args:
        id (int): sample id (the run index)
        observed (outbreakpred.dataset.ObservedSequence): the observation
        label (int): 0 or 1
        final_r (int): final size of the run, kept for audit
    """
    def __init__(self, id, observed, label, final_r):
        self.id = int(id)
        self.observed = observed
        self.label = int(label)
        self.final_r = int(final_r)


def _split_sizes(n, ratios):
    # largest remainder; float fuzz is rounded away before flooring
    exact = np.round(np.asarray(ratios) * n, 9)
    sizes = np.floor(exact).astype(np.int64)
    remainder = n - sizes.sum()
    order = np.argsort(-(exact - sizes), kind="stable")
    sizes[order[:remainder]] += 1
    return sizes


def stratified_split(labels, ratios, split_seed):
    """
    Assigns every sample to a split so that each class is spread evenly over
    the splits. Within each class samples are shuffled with split_seed and
    placed at evenly spaced positions; the merged order is then cut into
    consecutive blocks of the requested sizes.

    Args:
        labels (np.array): per-sample labels
        ratios (tuple): (train, validation, test) fractions, positive, summing to 1
        split_seed (int): seed of the shuffle

    Returns:
        np.array: split name per sample
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.size != len(split_names) or np.any(ratios <= 0) or abs(ratios.sum() - 1) > 1e-9:
        raise DatasetException("split ratios must be three positive numbers summing to 1")
    labels = np.asarray(labels)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(split_seed))))

    keys = np.zeros(labels.size)
    for cls in (0, 1):
        members = np.nonzero(labels == cls)[0]
        if members.size == 0:
            raise DatasetException("class {0} is absent; cannot stratify".format(cls))
        perm = rng.permutation(members)
        keys[perm] = (np.arange(members.size) + 0.5) / members.size
    order = np.lexsort((labels, keys))

    sizes = _split_sizes(labels.size, ratios)
    assignment = np.empty(labels.size, dtype=object)
    start = 0
    for name, size in zip(split_names, sizes):
        assignment[order[start:start + size]] = name
        start += size
    return assignment


class Dataset():
    """
    Labeled samples with a split assignment and provenance

    Args:
        samples (list): LabeledSample objects ordered by id
        splits (array_like): split name per sample, aligned with samples
        provenance (dict): where the data came from (network, beta, mu, phi_star, seeds, ...)

    Attributes:
        samples (list): the samples
        splits (np.array): split names
        provenance (dict): provenance block
    """
    def __init__(self, samples, splits, provenance=None):
        self.samples = list(samples)
        self.splits = np.asarray(splits, dtype=object)
        self.provenance = provenance if provenance is not None else {}
        if self.splits.size != len(self.samples):
            raise DatasetException("every sample needs exactly one split")
        unknown = set(self.splits.tolist()) - set(split_names)
        if unknown:
            raise DatasetException("unknown split name(s): {0}".format(sorted(unknown)))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return self.samples.__iter__()

    def __getitem__(self, index):
        return self.samples[index]

    @property
    def t_o(self):
        return self.samples[0].observed.t_o if self.samples else self.provenance.get("t_o")

    @property
    def graph_hash(self):
        return self.provenance.get("graph_hash", "")

    def split(self, name):
        """
        Samples assigned to one split

        Args:
            name (str): train, validation or test

        Returns:
            list: LabeledSample objects
        """
        if name not in split_names:
            raise DatasetException("unknown split {0}".format(name))
        return [sample for sample, s in zip(self.samples, self.splits) if s == name]

    def labels(self, name=None):
        samples = self.samples if name is None else self.split(name)
        return np.array([sample.label for sample in samples], dtype=np.int64)

    def class_balance(self, name=None):
        """
        Fraction of take-off samples

        Args:
            name (str): restrict to one split, or None for all samples

        Returns:
            float: positive fraction
        """
        labels = self.labels(name)
        if labels.size == 0:
            raise DatasetException("no samples to compute a class balance from")
        return float(np.mean(labels))

    def subsample(self, name, n, seed=0):
        """
        Dataset whose `name` split is cut down to n samples (stratified by
        keeping the class ratio); other splits are unchanged. Used to build the
        small target-network training sets of the finetuning experiments.

        Args:
            name (str): split to shrink
            n (int): samples to keep in that split
            seed (int): shuffle seed

        Returns:
            outbreakpred.dataset.Dataset: the reduced dataset
        """
        check.positive_scalar_integer(n, "n", DatasetException)
        members = np.nonzero(self.splits == name)[0]
        if n >= members.size:
            return self
        labels = self.labels()[members]
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
        keep = []
        n_pos = int(round(n * labels.mean()))
        n_pos = min(max(n_pos, 1), n - 1)
        for cls, quota in ((1, n_pos), (0, n - n_pos)):
            pool = members[labels == cls]
            keep.extend(rng.permutation(pool)[:quota].tolist())
        keep = set(keep)
        kept = [i for i in range(len(self.samples)) if self.splits[i] != name or i in keep]
        provenance = dict(self.provenance)
        provenance["subsample"] = {"split": name, "n": n, "seed": seed}
        return Dataset([self.samples[i] for i in kept], self.splits[kept], provenance)

    def save(self, filepath):
        """
        Writes the dataset as JSONL: provenance header, then one sample per line

        Args:
            filepath (str): output path
        """
        header = {"format_version": outbreakpred.format_version, "kind": "dataset"}
        header.update(self.provenance)
        with open(filepath, "w") as f:
            f.write(json.dumps(header) + "\n")
            for sample, split in zip(self.samples, self.splits):
                obs = sample.observed
                line = {
                    "id": sample.id,
                    "label": sample.label,
                    "t_o": obs.t_o,
                    "cum_counts": obs.cum_counts.tolist(),
                    "new_counts": obs.new_counts.tolist(),
                    "infected_nodes": [nodes.tolist() for nodes in obs.infected_nodes],
                    "seed_nodes": obs.seed_nodes.tolist(),
                    "final_r": sample.final_r,
                    "split": split,
                }
                f.write(json.dumps(line) + "\n")

    @classmethod
    def load(cls, filepath):
        """
        Reads a dataset written by save()

        Args:
            filepath (str): JSONL path

        Returns:
            outbreakpred.dataset.Dataset: the dataset
        """
        with open(filepath, "r") as f:
            header = json.loads(f.readline())
            if header.pop("kind", None) != "dataset":
                raise DatasetException("{0} is not a dataset file".format(filepath))
            version = header.pop("format_version", None)
            if version != outbreakpred.format_version:
                raise DatasetException("{0} has format version {1}, expected {2}".format(
                    filepath, version, outbreakpred.format_version))
            samples = []
            splits = []
            for line in f:
                if len(line.strip()) == 0:
                    continue
                entry = json.loads(line)
                observed = ObservedSequence(entry["t_o"], entry["cum_counts"], entry["new_counts"],
                                            entry["infected_nodes"], entry["seed_nodes"])
                samples.append(LabeledSample(entry["id"], observed, entry["label"], entry["final_r"]))
                splits.append(entry["split"])
        return cls(samples, splits, header)


def build_dataset(batch, t_o, labeling, split_ratios=(0.8, 0.1, 0.1), split_seed=0):
    """
    Labels and truncates every run of a batch and assigns stratified splits

    Args:
        batch (outbreakpred.sim.BatchResult): simulated runs
        t_o (int): observation step
        labeling (outbreakpred.dataset.LabelingConfig or float): labeling rule, or an explicit phi_star
        split_ratios (tuple): (train, validation, test) fractions
        split_seed (int): seed of the split shuffle

    Returns:
        outbreakpred.dataset.Dataset: the dataset
    """
    if len(batch) == 0:
        raise DatasetException("cannot build a dataset from an empty batch")
    if not isinstance(labeling, LabelingConfig):
        labeling = LabelingConfig(phi_star=labeling)
    phi_star = labeling.resolve(batch)

    samples = []
    for run_id, (traj, record) in enumerate(batch):
        observed = truncate(traj, record, t_o)
        samples.append(LabeledSample(run_id, observed, label(traj.final_r, phi_star), traj.final_r))
    labels = np.array([sample.label for sample in samples])
    splits = stratified_split(labels, split_ratios, split_seed)

    provenance = {
        "network": batch.network,
        "graph_hash": batch.graph_hash,
        "n_nodes": batch.n_nodes,
        "beta": batch.params.beta,
        "mu": batch.params.mu,
        "master_seed": batch.config.master_seed,
        "phi_star": phi_star,
        "auto_phi": labeling.auto_phi and labeling.phi_star is None,
        "t_o": int(t_o),
        "split_ratios": [float(r) for r in split_ratios],
        "split_seed": int(split_seed),
    }
    outbreakpred.log("dataset t_o={0}: {1} samples, phi_star={2}, take-off fraction {3:.3f}".format(
        t_o, len(samples), phi_star, labels.mean()))
    return Dataset(samples, splits, provenance)
