"""
Classification metrics (confusion counts, accuracy / precision / recall / F1,
ROC and rank AUC), observation-time sweeps and the pretrain-finetune comparison.
"""
import dataclasses
import json
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.integrate
import scipy.stats

import outbreakpred
import outbreakpred.dataset as dataset
import outbreakpred.nn as nn


class EvaluationException(Exception):
    """Exception class for the evaluation module."""


class EmptyInput(EvaluationException):
    """Raised when there is nothing to evaluate or draw."""


class _Undefined():
    """
    Marker for a metric whose denominator is zero. Never compares equal to a number.
    """
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "undefined"

    __str__ = __repr__

    def __reduce__(self):
        return (_Undefined, ())


UNDEFINED = _Undefined()

metric_columns = ["model", "t_o", "accuracy", "precision", "recall", "f1", "auc", "n_test"]


def is_undefined(value):
    return value is UNDEFINED


def _check_inputs(labels, scores):
    labels = np.asarray(labels).astype(np.int64).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if labels.shape != scores.shape:
        raise EvaluationException("labels and scores differ in length ({0} vs {1})".format(labels.size, scores.size))
    if labels.size == 0:
        raise EmptyInput("no samples to evaluate")
    return labels, scores


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def confusion(labels, scores, cutoff=0.5):
    """
    Confusion counts with prediction = 1 iff score >= cutoff

    Args:
        labels (array_like): labels in {0, 1}
        scores (array_like): scores in [0, 1]
        cutoff (float): decision cutoff

    Returns:
        outbreakpred.evaluation.ConfusionCounts: the counts
    """
    labels, scores = _check_inputs(labels, scores)
    pred = scores >= cutoff
    pos = labels == 1
    return ConfusionCounts(tp=int(np.sum(pred & pos)), fp=int(np.sum(pred & ~pos)),
                           tn=int(np.sum(~pred & ~pos)), fn=int(np.sum(~pred & pos)))


def _ratio(num, den):
    return num / den if den > 0 else UNDEFINED


def metrics(counts):
    """
    Accuracy, precision, recall and F1 = 2TP / (2TP + FP + FN).
    A metric with a zero denominator is UNDEFINED, never 0.

    Args:
        counts (outbreakpred.evaluation.ConfusionCounts): confusion counts

    Returns:
        dict: accuracy, precision, recall, f1
    """
    if counts.total == 0:
        raise EmptyInput("metrics of empty confusion counts")
    return {
        "accuracy": (counts.tp + counts.tn) / counts.total,
        "precision": _ratio(counts.tp, counts.tp + counts.fp),
        "recall": _ratio(counts.tp, counts.tp + counts.fn),
        "f1": _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn),
    }


def auc(labels, scores):
    """
    Rank (Mann-Whitney) AUC with midranks for ties:
    (sum of positive ranks - n+(n+ + 1)/2) / (n+ n-)

    Args:
        labels (array_like): labels in {0, 1}
        scores (array_like): scores

    Returns:
        float: AUC, or UNDEFINED when only one class is present
    """
    labels, scores = _check_inputs(labels, scores)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return UNDEFINED
    ranks = scipy.stats.rankdata(scores, method="average")
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass(frozen=True)
class RocCurve:
    """
    ROC points from (0, 0) to (1, 1); thresholds[i] is the cutoff of point i
    (inf for the origin)
    """
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def points(self):
        return [[float(x), float(y)] for x, y in zip(self.fpr, self.tpr)]

    def trapezoid_auc(self):
        return float(scipy.integrate.trapezoid(self.tpr, self.fpr))


def roc_curve(labels, scores):
    """
    ROC curve from a sweep of the cutoff over the unique scores in descending order

    Args:
        labels (array_like): labels in {0, 1}
        scores (array_like): scores

    Returns:
        outbreakpred.evaluation.RocCurve: the curve
    """
    labels, scores = _check_inputs(labels, scores)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationException("ROC curve needs both classes")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # last index of every block of equal scores
    ends = np.r_[np.nonzero(np.diff(sorted_scores))[0], sorted_scores.size - 1]
    tp = np.cumsum(sorted_labels == 1)[ends]
    fp = np.cumsum(sorted_labels == 0)[ends]
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    thresholds = np.r_[np.inf, sorted_scores[ends]]
    return RocCurve(fpr, tpr, thresholds)


def evaluate(model, samples):
    """
    Every metric of a classifier on a list of labeled samples

    Args:
        model (outbreakpred.models.Classifier): trained classifier
        samples (list): LabeledSample test samples

    Returns:
        tuple:
            report (dict): accuracy, precision, recall, f1, auc, n_test
            roc (outbreakpred.evaluation.RocCurve): the ROC curve, or None with a single class
    """
    if len(samples) == 0:
        raise EmptyInput("no test samples")
    labels = np.array([s.label for s in samples])
    scores = model.predict_proba_batch([s.observed for s in samples])
    if np.any(scores < 0) or np.any(scores > 1) or not np.all(np.isfinite(scores)):
        raise EvaluationException("classifier produced scores outside [0, 1]")
    report = metrics(confusion(labels, scores))
    report["auc"] = auc(labels, scores)
    report["n_test"] = int(labels.size)
    roc = roc_curve(labels, scores) if not is_undefined(report["auc"]) else None
    return report, roc


class SweepResult():
    """
    Metric table of an observation-time sweep plus ROC points per cell

    Args:
        table (pandas.DataFrame): one row per (model, t_o)
        roc (list): dicts with model, t_o and points
    """
    def __init__(self, table, roc):
        self.table = table
        self.roc = roc

    def to_csv(self, filepath):
        write_metrics_csv(self.table, filepath)

    def roc_to_json(self, filepath):
        """
        Writes the ROC points of every cell as JSON

        Args:
            filepath (str): output path
        """
        with open(filepath, "w") as f:
            json.dump({"format_version": outbreakpred.format_version, "curves": self.roc}, f, indent=1)


def write_metrics_csv(table, filepath):
    """
    Writes a metric table with UNDEFINED written as `undefined`, preceded by a format-version comment

    Args:
        table (pandas.DataFrame): metric rows
        filepath (str): output path
    """
    out = table[metric_columns].copy()
    for col in metric_columns[2:]:
        out[col] = out[col].map(lambda v: "undefined" if is_undefined(v) else v)
    with open(filepath, "w") as f:
        f.write("# outbreakpred format-version {0}\n".format(outbreakpred.format_version))
        out.to_csv(f, index=False, float_format="%.10g")


def read_metrics_csv(filepath):
    """
    Reads a metric CSV; `undefined` and `failed` cells become NaN

    Args:
        filepath (str): path

    Returns:
        pandas.DataFrame: metric table
    """
    df = pd.read_csv(filepath, comment="#", na_values=["undefined", "failed"])
    missing = set(metric_columns) - set(df.columns)
    if missing:
        raise EvaluationException("{0} lacks metric columns {1}".format(filepath, sorted(missing)))
    return df


def sweep_observation_times(models, batch, t_o_list, labeling, graph=None, split_ratios=(0.8, 0.1, 0.1),
                            split_seed=0, train_config=None):
    """
    Retrains and evaluates every model at every observation step. Each t_o gets
    its own truncated dataset; a cell that fails to train is marked failed and
    the sweep goes on.

    Args:
        models (dict or list): model name -> factory(t_o) returning an untrained
            Classifier, or a list of CLI model names
        batch (outbreakpred.sim.BatchResult): simulated runs
        t_o_list (list): observation steps
        labeling (outbreakpred.dataset.LabelingConfig or float): labeling rule
        graph (outbreakpred.netgen.Graph): network of the batch (needed by OGWN)
        split_ratios (tuple): dataset split fractions
        split_seed (int): split seed
        train_config (outbreakpred.models.TrainConfig): optimizer settings of neural models

    Returns:
        outbreakpred.evaluation.SweepResult: metric table and ROC data
    """
    import outbreakpred.models as models_mod

    if not isinstance(models, dict):
        models = {name: (lambda t_o, name=name: models_mod.build_classifier(name)) for name in models}
    if len(models) == 0 or len(t_o_list) == 0:
        raise EmptyInput("a sweep needs at least one model and one observation time")
    if not isinstance(labeling, dataset.LabelingConfig):
        labeling = dataset.LabelingConfig(phi_star=labeling)
    phi_star = labeling.resolve(batch)

    rows = []
    curves = []
    for t_o in t_o_list:
        ds = dataset.build_dataset(batch, t_o, phi_star, split_ratios, split_seed)
        train, val, test = ds.split("train"), ds.split("validation"), ds.split("test")
        for name, factory in models.items():
            outbreakpred.log("sweep cell model={0} t_o={1}".format(name, t_o))
            try:
                model = factory(t_o)
                model.fit(train, val, graph=graph, train_config=train_config)
                report, roc = evaluate(model, test)
            except (models_mod.ModelException, EvaluationException, dataset.DatasetException,
                    nn.NNException, ArithmeticError, ValueError) as err:
                warnings.warn("sweep cell model={0} t_o={1} failed: {2}".format(name, t_o, err))
                row = {col: "failed" for col in metric_columns}
                row.update({"model": name, "t_o": t_o, "n_test": len(test)})
                rows.append(row)
                continue
            row = {"model": name, "t_o": t_o}
            row.update(report)
            rows.append(row)
            if roc is not None:
                curves.append({"model": name, "t_o": t_o, "points": roc.points()})
    return SweepResult(pd.DataFrame(rows, columns=metric_columns), curves)


def relative_improvement(new_auc, base_auc):
    """
    Percentage change of new_auc over base_auc

    Args:
        new_auc (float): improved value
        base_auc (float): reference value (> 0)

    Returns:
        float: 100 * (new - base) / base
    """
    if base_auc <= 0:
        raise EvaluationException("base AUC must be positive")
    return 100.0 * (new_auc - base_auc) / base_auc


def compare_pretrain_finetune(pretrained, target_graph, target_batch, t_o_list, labeling, seeds, n_train=500,
                              finetune_config=None, train_config=None, split_ratios=(0.8, 0.1, 0.1)):
    """
    Scratch OGWN against the finetuned pretrained OGWN on a small target training
    set, averaged over seeds, for every observation step

    Args:
        pretrained (outbreakpred.models.OgwnModel): pretrained model
        target_graph (outbreakpred.netgen.Graph): held-out target network
        target_batch (outbreakpred.sim.BatchResult): runs on the target network
        t_o_list (list): observation steps
        labeling (outbreakpred.dataset.LabelingConfig or float): labeling rule
        seeds (list): seeds; each drives the training subsample, the scratch initialization and both shuffles
        n_train (int): training samples kept on the target network
        finetune_config (outbreakpred.models.FinetuneConfig): finetuning settings (its seed is replaced)
        train_config (outbreakpred.models.TrainConfig): scratch training settings (its seed is replaced)
        split_ratios (tuple): dataset split fractions

    Returns:
        pandas.DataFrame: t_o, scratch_auc, finetune_auc, improvement_pct, improvement_points, n_seeds
    """
    import outbreakpred.models as models_mod

    if len(seeds) == 0:
        raise EmptyInput("need at least one seed")
    if finetune_config is None:
        finetune_config = models_mod.FinetuneConfig()
    if train_config is None:
        train_config = models_mod.TrainConfig.default()
    if not isinstance(labeling, dataset.LabelingConfig):
        labeling = dataset.LabelingConfig(phi_star=labeling)
    phi_star = labeling.resolve(target_batch)

    rows = []
    for t_o in t_o_list:
        full = dataset.build_dataset(target_batch, t_o, phi_star, split_ratios, split_seed=0)
        test = full.split("test")
        scratch_aucs = []
        finetune_aucs = []
        for seed in seeds:
            ds = full.subsample("train", n_train, seed=seed)
            train, val = ds.split("train"), ds.split("validation")
            scratch = models_mod.OgwnModel(pretrained.config, seed)
            scratch.fit(train, val, graph=target_graph, train_config=dataclasses.replace(train_config, seed=seed))
            tuned = models_mod.finetune(pretrained, target_graph, (train, val),
                                        dataclasses.replace(finetune_config, seed=seed))
            scratch_aucs.append(evaluate(scratch, test)[0]["auc"])
            finetune_aucs.append(evaluate(tuned, test)[0]["auc"])
        if any(is_undefined(v) for v in scratch_aucs + finetune_aucs):
            raise EvaluationException("the test split at t_o={0} holds a single class".format(t_o))
        scratch_mean = float(np.mean(scratch_aucs))
        finetune_mean = float(np.mean(finetune_aucs))
        rows.append({"t_o": t_o, "scratch_auc": scratch_mean, "finetune_auc": finetune_mean,
                     "improvement_pct": relative_improvement(finetune_mean, scratch_mean),
                     "improvement_points": 100.0 * (finetune_mean - scratch_mean), "n_seeds": len(seeds)})
    return pd.DataFrame(rows)
