import argparse
import os
import shutil

import numpy as np
import pytest
import scipy.stats

import outbreakpred
import outbreakpred.walker as walker
import outbreakpred.evaluation as evaluation

thisfile_dir = os.path.dirname(__file__) # this file's folder

baselines = ["st5", "st15", "st25", "knn", "ocnn"]


def _check_ordering(metrics_path):
    table = evaluation.read_metrics_csv(metrics_path)
    auc = table.pivot(index="t_o", columns="model", values="auc")
    print(auc)

    # OGWN is never worse than a baseline by more than a hundredth
    for model in baselines:
        assert np.all(auc["ogwn"] >= auc[model] - 0.01), model
    means = auc.mean(axis=0)
    assert means.idxmax() == "ogwn"
    assert all(means["ogwn"] > means[model] for model in baselines)

    # later observation gives better predictions
    for model in auc.columns:
        rho = scipy.stats.spearmanr(auc.index, auc[model]).correlation
        print(model, "spearman:", rho)
        assert rho > 0.8, model


def _run_template(template, outputdir):
    if os.path.exists(outputdir):
        shutil.rmtree(outputdir)
    os.mkdir(outputdir)
    recipe = walker.autogen_recipe(template, outputdir)
    state = walker.run_recipe(recipe)
    return state


@pytest.mark.e2e
def test_er_model_ordering(e2eoutput_path):
    state = _run_template("er_sweep.json", os.path.join(e2eoutput_path, "er_sweep_output"))
    _check_ordering(state["metrics"])


@pytest.mark.e2e
def test_ba_model_ordering(e2eoutput_path):
    state = _run_template("ba_sweep.json", os.path.join(e2eoutput_path, "ba_sweep_output"))
    _check_ordering(state["metrics"])


if __name__ == "__main__":
    outputdir = thisfile_dir

    ap = argparse.ArgumentParser(description="run the model-ordering end-to-end tests")
    ap.add_argument("-o", "--outputdir", default=outputdir,
                    help="directory to write results to [%(default)s]")
    args = ap.parse_args()
    outputdir = args.outputdir
    test_er_model_ordering(outputdir)
    test_ba_model_ordering(outputdir)
