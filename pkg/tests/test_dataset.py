import os

import numpy as np
import pytest

import outbreakpred.sim as sim
import outbreakpred.dataset as dataset
import outbreakpred.mocks as mocks


@pytest.fixture(scope="module")
def bimodal():
    return mocks.create_bimodal_batch()


def _chain_run(n=5):
    graph = mocks.create_path_graph(n)
    return sim.run_stochastic_sir(graph, sim.SirParams(1.0, 1.0), sim.SimConfig(seed_selection=0), 0)


def test_label():
    assert(dataset.label(10, 10) == 1)
    assert(dataset.label(9, 10) == 0)
    assert(dataset.label(0, 0.5) == 0)
    with pytest.raises(dataset.DatasetException):
        dataset.label(3, 0)


def test_auto_phi_star_valley():
    """
    The threshold is the first lowest bin of the smoothed histogram between the two modes
    """
    rng = np.random.default_rng(0)
    dieout = rng.integers(0, 4, size=500)
    takeoff = rng.normal(80, 1.5, size=300).round().astype(int)
    phi_star = dataset.auto_phi_star(np.concatenate([dieout, takeoff]), bin_width=1)
    # the smoothed die-out mode reaches down to bin 5; bin 6 is the first empty one
    assert(phi_star == 6)

    with pytest.raises(dataset.UnimodalError):
        dataset.auto_phi_star(dieout, bin_width=1)


def test_auto_phi_star_on_simulation(bimodal):
    graph, batch = bimodal
    phi_star = dataset.auto_phi_star(batch)
    assert(0 < phi_star < 0.5 * graph.n)
    labels = batch.final_sizes >= phi_star
    assert(0.6 < labels.mean() < 0.92)


def test_labeling_config(bimodal):
    _, batch = bimodal
    with pytest.raises(dataset.DatasetException):
        dataset.LabelingConfig()
    with pytest.raises(dataset.DatasetException):
        dataset.LabelingConfig(phi_star=-1.0)
    assert(dataset.LabelingConfig(phi_star=40).resolve(batch) == 40)
    with pytest.raises(dataset.DatasetException):
        dataset.LabelingConfig(phi_star=batch.n_nodes).resolve(batch)
    # an explicit threshold wins over auto_phi
    assert(dataset.LabelingConfig(phi_star=40, auto_phi=True).resolve(batch) == 40)
    assert(dataset.LabelingConfig(auto_phi=True).resolve(batch) == dataset.auto_phi_star(batch))


def test_truncate():
    traj, record = _chain_run()
    obs = dataset.truncate(traj, record, 2)
    assert(obs.t_o == 2)
    assert(np.array_equal(obs.cum_counts, [1, 2, 3]))
    assert(np.array_equal(obs.new_counts, [0, 1, 1]))
    assert([nodes.tolist() for nodes in obs.infected_nodes] == [[], [1], [2]])
    assert(np.array_equal(obs.seed_nodes, [0]))
    assert(obs.final_count == 3)

    # a run that ended before t_o continues with zero new infections
    late = dataset.truncate(traj, record, 8)
    assert(np.array_equal(late.new_counts, [0, 1, 1, 1, 1, 0, 0, 0, 0]))
    assert(late.final_count == 5)

    assert(late.truncate(2) == obs)
    with pytest.raises(dataset.DatasetException):
        obs.truncate(3)

    at_zero = dataset.truncate(traj, record, 0)
    assert(np.array_equal(at_zero.cum_counts, [1]))
    assert(at_zero.infected_nodes[0].size == 0)

    wrong = sim.TransmissionRecord([0, 1], record.infections, record.recoveries)
    with pytest.raises(dataset.DatasetException):
        dataset.truncate(traj, wrong, 2)

    with pytest.raises(dataset.DatasetException):
        dataset.ObservedSequence(2, [1, 2], [0, 1], [[], []], [0])


def test_split_sizes():
    assert(dataset._split_sizes(10, (0.8, 0.1, 0.1)).tolist() == [8, 1, 1])
    assert(dataset._split_sizes(7, (0.5, 0.25, 0.25)).tolist() == [3, 2, 2])
    assert(dataset._split_sizes(100, (0.7, 0.2, 0.1)).sum() == 100)


def test_stratified_split():
    """
    Each split holds about the overall class ratio and the assignment depends only on the seed
    """
    labels = np.array([1] * 30 + [0] * 70)
    splits = dataset.stratified_split(labels, (0.8, 0.1, 0.1), 5)
    for name, size, ones in (("train", 80, 24), ("validation", 10, 3), ("test", 10, 3)):
        members = splits == name
        assert(members.sum() == size)
        assert(abs(labels[members].sum() - ones) <= 1)

    again = dataset.stratified_split(labels, (0.8, 0.1, 0.1), 5)
    assert(np.array_equal(again, splits))
    other = dataset.stratified_split(labels, (0.8, 0.1, 0.1), 6)
    assert(not np.array_equal(other, splits))

    with pytest.raises(dataset.DatasetException):
        dataset.stratified_split(np.zeros(10), (0.8, 0.1, 0.1), 0)
    with pytest.raises(dataset.DatasetException):
        dataset.stratified_split(labels, (0.8, 0.2, 0.0), 0)
    with pytest.raises(dataset.DatasetException):
        dataset.stratified_split(labels, (0.5, 0.2, 0.2), 0)


def test_build_dataset(bimodal):
    graph, batch = bimodal
    ds = dataset.build_dataset(batch, 4, dataset.LabelingConfig(auto_phi=True), split_seed=3)
    phi_star = ds.provenance["phi_star"]
    assert(len(ds) == len(batch))
    assert(ds.t_o == 4)
    assert(ds.graph_hash == graph.hash())
    assert(ds.provenance["auto_phi"])
    for sample, (traj, record) in zip(ds, batch):
        assert(sample.label == int(traj.final_r >= phi_star))
        assert(sample.final_r == traj.final_r)
        assert(sample.observed.t_o == 4)
        assert(sample.observed.final_count == sim.cumulative_at(record, 4))

    assert(len(ds.split("train")) == 320)
    assert(len(ds.split("validation")) == 40)
    assert(len(ds.split("test")) == 40)
    assert(abs(ds.class_balance("test") - ds.class_balance()) < 0.05)
    with pytest.raises(dataset.DatasetException):
        ds.split("holdout")

    again = dataset.build_dataset(batch, 4, phi_star, split_seed=3)
    assert(np.array_equal(again.splits, ds.splits))
    assert(not again.provenance["auto_phi"])


def test_dataset_save_load(tmp_path):
    graph, ds = mocks.create_toy_dataset(n_samples=60, t_o=5)
    filepath = os.path.join(tmp_path, "dataset.jsonl")
    ds.save(filepath)
    loaded = dataset.Dataset.load(filepath)
    assert(len(loaded) == 60)
    assert(loaded.provenance == ds.provenance)
    assert(np.array_equal(loaded.splits, ds.splits))
    for a, b in zip(ds, loaded):
        assert(a.id == b.id)
        assert(a.label == b.label)
        assert(a.observed == b.observed)

    with open(filepath, "w") as f:
        f.write('{"kind": "trajectories", "format_version": 1}\n')
    with pytest.raises(dataset.DatasetException):
        dataset.Dataset.load(filepath)


def test_subsample():
    _, ds = mocks.create_toy_dataset(n_samples=200)
    assert(len(ds.split("train")) == 120)
    small = ds.subsample("train", 20, seed=1)
    assert(len(small.split("train")) == 20)
    assert(small.labels("train").sum() == 10)
    assert(len(small.split("test")) == len(ds.split("test")))
    assert(small.provenance["subsample"] == {"split": "train", "n": 20, "seed": 1})
    assert(ds.subsample("train", 500) is ds)


if __name__ == "__main__":
    test_label()
    test_auto_phi_star_valley()
    test_truncate()
    test_stratified_split()
    test_subsample()
