import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

import outbreakpred
import outbreakpred.sim as sim
import outbreakpred.evaluation as evaluation
import outbreakpred.plotting as plotting

dc_ns = "{http://purl.org/dc/elements/1.1/}"


def _read_svg(filepath):
    """
    Group ids and the embedded series JSON of an SVG chart
    """
    root = ET.parse(filepath).getroot()
    gids = {elem.get("id") for elem in root.iter() if elem.get("id")}
    description = next(root.iter(dc_ns + "description")).text
    return gids, json.loads(description)


def test_plot_lines(tmp_path):
    filepath = os.path.join(tmp_path, "lines.svg")
    plotting.plot_lines({"knn": ([1, 2, 3], [0.5, 0.6, 0.7]), "st 5": ([1, 2, 3], [0.4, 0.4, 0.5])}, filepath)
    gids, meta = _read_svg(filepath)
    assert("series-knn" in gids)
    assert("series-st_5" in gids)
    assert(meta["format_version"] == outbreakpred.format_version)
    assert(meta["series"]["knn"]["y"] == [0.5, 0.6, 0.7])

    # identical inputs give identical files
    again = os.path.join(tmp_path, "again.svg")
    plotting.plot_lines({"knn": ([1, 2, 3], [0.5, 0.6, 0.7]), "st 5": ([1, 2, 3], [0.4, 0.4, 0.5])}, again)
    with open(filepath) as f1, open(again) as f2:
        assert(f1.read() == f2.read())

    with pytest.raises(evaluation.EmptyInput):
        plotting.plot_lines({}, filepath)
    with pytest.raises(evaluation.EmptyInput):
        plotting.plot_lines({"a": ([1, 2], [1])}, filepath)


def test_plot_histogram(tmp_path):
    hist = sim.final_size_histogram([0, 1, 1, 5, 9], bin_width=5, n_nodes=10)
    filepath = os.path.join(tmp_path, "histogram.svg")
    plotting.plot_histogram(hist.bin_starts, hist.counts, hist.bin_width, filepath)
    gids, meta = _read_svg(filepath)
    assert("series-histogram" in gids)
    assert(meta["series"]["histogram"]["y"] == [3, 2, 0])
    assert(meta["series"]["histogram"]["bin_width"] == 5)

    with pytest.raises(evaluation.EmptyInput):
        plotting.plot_histogram([0, 5], [0, 0], 5, filepath)


def test_plot_metrics_skips_undefined(tmp_path):
    table = pd.DataFrame({"model": ["st5", "st5", "knn", "knn"], "t_o": [4, 2, 2, 4],
                          "auc": [0.7, 0.6, np.nan, 0.9]})
    filepath = os.path.join(tmp_path, "metrics.svg")
    plotting.plot_metrics(table, filepath)
    _, meta = _read_svg(filepath)
    assert(meta["series"]["st5"] == {"x": [2.0, 4.0], "y": [0.6, 0.7]})
    assert(meta["series"]["knn"] == {"x": [4.0], "y": [0.9]})

    with pytest.raises(evaluation.EmptyInput):
        plotting.plot_metrics(table[:0], filepath)


def test_plot_roc_and_trajectories(tmp_path):
    curves = [{"model": "knn", "t_o": 5, "points": [[0.0, 0.0], [0.2, 0.7], [1.0, 1.0]]}]
    filepath = os.path.join(tmp_path, "roc.svg")
    plotting.plot_roc(curves, filepath)
    gids, meta = _read_svg(filepath)
    assert("series-knn_t5" in gids)
    assert(meta["series"]["knn_t5"]["x"] == [0.0, 0.2, 1.0])

    with pytest.raises(evaluation.EmptyInput):
        plotting.plot_roc([], filepath)

    table = pd.DataFrame({"run_id": [0, 0, 1, 1], "t": [0, 1, 0, 1], "s": [9, 8, 9, 9],
                          "i": [1, 1, 1, 0], "r": [0, 1, 0, 1]})
    ode = sim.run_deterministic_sir(0.2, 0.1, 10, 1.0, 2, 0.5)
    filepath = os.path.join(tmp_path, "trajectories.svg")
    plotting.plot_trajectories(table, filepath, ode=ode)
    gids, meta = _read_svg(filepath)
    assert({"series-run0", "series-run1", "series-ode"} <= gids)
    assert(meta["series"]["run1"]["y"] == [1.0, 0.0])


if __name__ == "__main__":
    test_plot_lines(".")
    test_plot_metrics_skips_undefined(".")
