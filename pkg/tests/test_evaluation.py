import json
import os
import pickle

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, assume, settings
import hypothesis.strategies as st

import outbreakpred
import outbreakpred.dataset as dataset
import outbreakpred.graphwave as graphwave
import outbreakpred.models as models
import outbreakpred.evaluation as evaluation
import outbreakpred.mocks as mocks
import outbreakpred.nn as nn


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
    monkeypatch.setattr(outbreakpred, "cache_embeddings", False)
    monkeypatch.setattr(outbreakpred, "verbose", False)


@pytest.fixture(scope="module")
def bimodal():
    return mocks.create_bimodal_batch()


class ConstantClassifier(models.Classifier):
    def __init__(self, value):
        self.value = value

    def predict_proba_batch(self, observed_list):
        return np.full(len(observed_list), self.value)


def _samples(labels, counts):
    samples = []
    for i, (label, count) in enumerate(zip(labels, counts)):
        observed = dataset.ObservedSequence(1, [1, count], [0, count - 1], [[], list(range(count - 1))], [0])
        samples.append(dataset.LabeledSample(i, observed, label, count))
    return samples


def test_confusion_and_metrics():
    counts = evaluation.confusion([1, 1, 0, 0], [0.9, 0.5, 0.5, 0.1])
    assert(counts == evaluation.ConfusionCounts(tp=2, fp=1, tn=1, fn=0))
    report = evaluation.metrics(counts)
    assert(report["accuracy"] == 0.75)
    assert(report["precision"] == pytest.approx(2 / 3))
    assert(report["recall"] == 1.0)
    assert(report["f1"] == pytest.approx(0.8))

    with pytest.raises(evaluation.EmptyInput):
        evaluation.metrics(evaluation.ConfusionCounts(0, 0, 0, 0))
    with pytest.raises(evaluation.EmptyInput):
        evaluation.confusion([], [])
    with pytest.raises(evaluation.EvaluationException):
        evaluation.confusion([1, 0], [0.3])


def test_undefined_metrics():
    """
    A zero denominator gives UNDEFINED rather than 0
    """
    report = evaluation.metrics(evaluation.confusion([1, 0, 0], [0.1, 0.2, 0.3]))
    assert(evaluation.is_undefined(report["precision"]))
    assert(report["recall"] == 0.0)
    assert(report["f1"] == 0.0)

    report = evaluation.metrics(evaluation.confusion([0, 0], [0.1, 0.2]))
    assert(evaluation.is_undefined(report["precision"]))
    assert(evaluation.is_undefined(report["recall"]))
    assert(evaluation.is_undefined(report["f1"]))
    assert(report["accuracy"] == 1.0)

    assert(evaluation.UNDEFINED != 0)
    assert(str(evaluation.UNDEFINED) == "undefined")
    assert(pickle.loads(pickle.dumps(evaluation.UNDEFINED)) is evaluation.UNDEFINED)


def test_auc():
    assert(evaluation.auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0)
    assert(evaluation.auc([1, 1, 0, 0], [0.1, 0.2, 0.8, 0.9]) == 0.0)
    assert(evaluation.auc([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5]) == 0.5)
    # one tied positive-negative pair counts one half
    assert(evaluation.auc([1, 0, 1, 0], [0.8, 0.8, 0.3, 0.1]) == pytest.approx(0.625))
    assert(evaluation.is_undefined(evaluation.auc([1, 1], [0.2, 0.4])))


def test_roc_curve():
    roc = evaluation.roc_curve([1, 0, 1, 0], [0.8, 0.8, 0.3, 0.1])
    assert(roc.points() == [[0.0, 0.0], [0.5, 0.5], [0.5, 1.0], [1.0, 1.0]])
    assert(roc.thresholds[0] == np.inf)
    assert(roc.trapezoid_auc() == pytest.approx(0.625))

    with pytest.raises(evaluation.EvaluationException):
        evaluation.roc_curve([0, 0], [0.1, 0.9])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0])),
                min_size=2, max_size=40))
def test_auc_matches_roc_area(pairs):
    """
    The rank AUC equals the trapezoidal area under the ROC curve, ties included
    """
    labels = [p[0] for p in pairs]
    scores = [p[1] for p in pairs]
    assume(0 < sum(labels) < len(labels))
    roc = evaluation.roc_curve(labels, scores)
    assert(np.all(np.diff(roc.fpr) >= 0) and np.all(np.diff(roc.tpr) >= 0))
    assert(roc.points()[-1] == [1.0, 1.0])
    assert(evaluation.auc(labels, scores) == pytest.approx(roc.trapezoid_auc(), abs=1e-12))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(-20, 20)), min_size=2, max_size=30))
def test_monotone_transform_keeps_auc(pairs):
    """
    A strictly increasing transform of the scores leaves AUC and the ROC points unchanged
    """
    labels = [p[0] for p in pairs]
    scores = np.array([p[1] for p in pairs], dtype=float) / 20.0
    assume(0 < sum(labels) < len(labels))
    cubed = scores ** 3
    assert(evaluation.auc(labels, cubed) == evaluation.auc(labels, scores))
    assert(evaluation.roc_curve(labels, cubed).points() == evaluation.roc_curve(labels, scores).points())

def test_evaluate():
    samples = _samples([1, 1, 0, 0], [9, 6, 2, 7])
    report, roc = evaluation.evaluate(models.StClassifier(5), samples)
    assert(report["accuracy"] == 0.75)
    assert(report["n_test"] == 4)
    assert(report["auc"] == pytest.approx(0.75))
    assert(len(roc.points()) == 3)

    report, roc = evaluation.evaluate(models.StClassifier(5), samples[:2])
    assert(evaluation.is_undefined(report["auc"]))
    assert(roc is None)

    with pytest.raises(evaluation.EvaluationException):
        evaluation.evaluate(ConstantClassifier(1.5), samples)
    with pytest.raises(evaluation.EmptyInput):
        evaluation.evaluate(ConstantClassifier(0.5), [])


def test_metrics_csv(tmp_path):
    table = pd.DataFrame([
        {"model": "st5", "t_o": 4, "accuracy": 0.5, "precision": evaluation.UNDEFINED, "recall": 0.0,
         "f1": 0.0, "auc": 0.5, "n_test": 10},
        {"model": "knn", "t_o": 4, "accuracy": "failed", "precision": "failed", "recall": "failed",
         "f1": "failed", "auc": "failed", "n_test": 10},
    ], columns=evaluation.metric_columns)
    filepath = os.path.join(tmp_path, "metrics.csv")
    evaluation.write_metrics_csv(table, filepath)
    with open(filepath) as f:
        assert(f.readline().startswith("# outbreakpred format-version"))
        assert(f.readline().strip() == ",".join(evaluation.metric_columns))
        assert("undefined" in f.readline())

    df = evaluation.read_metrics_csv(filepath)
    assert(np.isnan(df["precision"][0]))
    assert(df["accuracy"][0] == 0.5)
    assert(np.isnan(df["auc"][1]))

    bad = os.path.join(tmp_path, "bad.csv")
    pd.DataFrame({"model": ["st5"]}).to_csv(bad, index=False)
    with pytest.raises(evaluation.EvaluationException):
        evaluation.read_metrics_csv(bad)


def test_relative_improvement():
    assert(evaluation.relative_improvement(0.9, 0.75) == pytest.approx(20.0))
    assert(evaluation.relative_improvement(0.7, 0.8) == pytest.approx(-12.5))
    with pytest.raises(evaluation.EvaluationException):
        evaluation.relative_improvement(0.5, 0.0)


def test_sweep_observation_times(bimodal, tmp_path):
    graph, batch = bimodal
    labeling = dataset.LabelingConfig(auto_phi=True)
    result = evaluation.sweep_observation_times(["st5", "knn"], batch, [2, 4], labeling, graph=graph)
    table = result.table
    assert(list(table.columns) == evaluation.metric_columns)
    assert(len(table) == 4)
    assert(table["model"].tolist() == ["st5", "knn", "st5", "knn"])
    assert(table["t_o"].tolist() == [2, 2, 4, 4])
    assert(np.all(table["n_test"] == 40))
    for value in table["auc"]:
        assert(0.0 <= value <= 1.0)
    assert(len(result.roc) == 4)

    filepath = os.path.join(tmp_path, "roc.json")
    result.roc_to_json(filepath)
    with open(filepath) as f:
        contents = json.load(f)
    assert(contents["format_version"] == outbreakpred.format_version)
    assert(contents["curves"][0]["points"][0] == [0.0, 0.0])


def _unreadable_checkpoint(t_o):
    raise nn.CheckpointError("checkpoint for t_o={0} is truncated".format(t_o))


def test_sweep_marks_failed_cells(bimodal):
    graph, batch = bimodal
    factories = {"knn": lambda t_o: models.KnnClassifier(5),
                 "broken": lambda t_o: models.KnnClassifier(100000),
                 "unreadable": _unreadable_checkpoint}
    with pytest.warns(UserWarning):
        result = evaluation.sweep_observation_times(factories, batch, [3], 30, graph=graph)
    broken = result.table[result.table["model"] == "broken"].iloc[0]
    assert(broken["auc"] == "failed")
    assert(broken["n_test"] == 40)
    unreadable = result.table[result.table["model"] == "unreadable"].iloc[0]
    assert(unreadable["auc"] == "failed")
    good = result.table[result.table["model"] == "knn"].iloc[0]
    assert(0.0 <= good["auc"] <= 1.0)

    with pytest.raises(evaluation.EmptyInput):
        evaluation.sweep_observation_times([], batch, [3], 30)


def test_compare_pretrain_finetune(bimodal):
    graph, batch = bimodal
    toy_graph, toy = mocks.create_toy_dataset(n_samples=80, t_o=3)
    config = models.OgwnConfig(graphwave.WaveletConfig(sample_points=(0.0, 5.0)), hidden_dim=3, mlp_hidden=(3,))
    pretrained = models.pretrain_on_cells([(toy_graph, toy)], config, models.TrainConfig(max_epochs=1))
    assert(pretrained.provenance["graph_hashes"] == [toy_graph.hash()])

    table = evaluation.compare_pretrain_finetune(
        pretrained, graph, batch, [3], dataset.LabelingConfig(auto_phi=True), seeds=[0, 1], n_train=40,
        finetune_config=models.FinetuneConfig(epochs=1), train_config=models.TrainConfig(max_epochs=1))
    assert(list(table.columns) == ["t_o", "scratch_auc", "finetune_auc", "improvement_pct",
                                   "improvement_points", "n_seeds"])
    row = table.iloc[0]
    assert(row["n_seeds"] == 2)
    assert(row["improvement_pct"] == pytest.approx(
        evaluation.relative_improvement(row["finetune_auc"], row["scratch_auc"])))
    assert(row["improvement_points"] == pytest.approx(100 * (row["finetune_auc"] - row["scratch_auc"])))

    with pytest.raises(evaluation.EmptyInput):
        evaluation.compare_pretrain_finetune(pretrained, graph, batch, [3], 30, seeds=[])


if __name__ == "__main__":
    test_confusion_and_metrics()
    test_undefined_metrics()
    test_auc()
    test_roc_curve()
