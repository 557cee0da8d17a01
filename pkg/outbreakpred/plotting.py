"""
Static SVG charts of pipeline outputs. Every drawn series carries an SVG group id
and the plotted values are embedded as JSON in the SVG metadata, so charts can be
checked without parsing paths.
"""
import json

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

import outbreakpred
import outbreakpred.evaluation as evaluation

# fixed ids and no timestamps, so identical inputs give identical files
matplotlib.rcParams["svg.hashsalt"] = "outbreakpred"
matplotlib.rcParams["svg.fonttype"] = "none"


def series_gid(name):
    return "series-{0}".format(str(name).replace(" ", "_"))


def _save(fig, filepath, data):
    description = json.dumps({"format_version": outbreakpred.format_version, "series": data}, sort_keys=True)
    fig.savefig(filepath, format="svg", metadata={"Date": None, "Description": description})
    plt.close(fig)


def _check_series(series):
    if len(series) == 0:
        raise evaluation.EmptyInput("nothing to plot")
    for name, (x, y) in series.items():
        if len(x) == 0 or len(x) != len(y):
            raise evaluation.EmptyInput("series {0} is empty or ragged".format(name))


def plot_lines(series, filepath, xlabel="", ylabel="", title=""):
    """
    One line per series

    Args:
        series (dict): name -> (x values, y values)
        filepath (str): output SVG path
        xlabel (str): x axis label
        ylabel (str): y axis label
        title (str): chart title
    """
    _check_series(series)
    fig, ax = plt.subplots(figsize=(6, 4))
    data = {}
    for name, (x, y) in series.items():
        x = [float(v) for v in x]
        y = [float(v) for v in y]
        line, = ax.plot(x, y, marker="o", label=str(name))
        line.set_gid(series_gid(name))
        data[str(name)] = {"x": x, "y": y}
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if 1 < len(series) <= 12:
        ax.legend()
    _save(fig, filepath, data)


def plot_histogram(bin_starts, counts, bin_width, filepath, title="final size"):
    """
    Final-size histogram as bars

    Args:
        bin_starts (array_like): left bin edges
        counts (array_like): counts per bin
        bin_width (int): bin width
        filepath (str): output SVG path
        title (str): chart title
    """
    bin_starts = np.asarray(bin_starts)
    counts = np.asarray(counts)
    if bin_starts.size == 0 or counts.sum() == 0:
        raise evaluation.EmptyInput("histogram has no counts")
    fig, ax = plt.subplots(figsize=(6, 4))
    edges = np.append(bin_starts, bin_starts[-1] + bin_width)
    patch = ax.stairs(counts, edges, fill=True)
    patch.set_gid(series_gid("histogram"))
    ax.set_xlabel("final recovered count")
    ax.set_ylabel("runs")
    ax.set_title(title)
    _save(fig, filepath, {"histogram": {"x": bin_starts.tolist(), "y": counts.tolist(), "bin_width": int(bin_width)}})


def plot_metrics(table, filepath, metric="auc"):
    """
    One line per model of a metric against the observation step

    Args:
        table (pandas.DataFrame): metric table (model, t_o, metrics...)
        filepath (str): output SVG path
        metric (str): column to plot
    """
    if len(table) == 0:
        raise evaluation.EmptyInput("metric table is empty")
    series = {}
    for model, rows in table.groupby("model", sort=False):
        rows = rows.sort_values("t_o")
        rows = rows[np.isfinite(rows[metric].astype(float))]
        if len(rows):
            series[model] = (rows["t_o"].tolist(), rows[metric].astype(float).tolist())
    plot_lines(series, filepath, xlabel="observation step t_o", ylabel=metric)


def plot_roc(curves, filepath):
    """
    ROC curves, one line per (model, t_o)

    Args:
        curves (list): dicts with model, t_o and points [[fpr, tpr], ...]
        filepath (str): output SVG path
    """
    series = {}
    for curve in curves:
        points = np.asarray(curve["points"], dtype=float).reshape(-1, 2)
        series["{0}_t{1}".format(curve["model"], curve["t_o"])] = (points[:, 0], points[:, 1])
    plot_lines(series, filepath, xlabel="false positive rate", ylabel="true positive rate")


def plot_trajectories(table, filepath, ode=None):
    """
    Infectious count of sampled runs, optionally with the deterministic reference

    Args:
        table (pandas.DataFrame): run_id, t, s, i, r rows (sim.sample_trajectories)
        filepath (str): output SVG path
        ode (outbreakpred.sim.OdeTrajectory): reference curve drawn on top
    """
    if len(table) == 0:
        raise evaluation.EmptyInput("no trajectories")
    series = {"run{0}".format(run_id): (rows["t"].tolist(), rows["i"].tolist())
              for run_id, rows in table.groupby("run_id")}
    if ode is not None:
        series["ode"] = (ode.t.tolist(), ode.I.tolist())
    plot_lines(series, filepath, xlabel="step", ylabel="infectious")
