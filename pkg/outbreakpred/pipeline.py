"""
File-in / file-out pipeline stages shared by the command line and the recipe
walker. Every stage writes its module's output format plus a run manifest.
"""
import dataclasses
import hashlib
import json
import os
import subprocess
import time

import pandas as pd

import outbreakpred
import outbreakpred.netgen as netgen
import outbreakpred.sim as sim
import outbreakpred.dataset as dataset
import outbreakpred.models as models
import outbreakpred.evaluation as evaluation
import outbreakpred.modeldb as modeldb
import outbreakpred.plotting as plotting


def version_string():
    """
    Package version, followed by `git describe` output when the package lives in a git checkout

    Returns:
        str: version string
    """
    version = outbreakpred.__version__
    try:
        described = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                                   cwd=os.path.dirname(os.path.abspath(__file__)), timeout=5)
    except (OSError, subprocess.SubprocessError):
        return version
    if described.returncode == 0 and described.stdout.strip():
        version = "{0}+{1}".format(version, described.stdout.strip())
    return version


def file_hash(filepath):
    digest = hashlib.sha256()
    with open(filepath, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(outdir, command, config, seeds, outputs, wall_time):
    """
    Writes `<command>.manifest.json` next to the outputs. content_hash covers
    everything except the wall time, so identical reruns share it.

    Args:
        outdir (str): directory of the outputs
        command (str): stage name
        config (dict): config snapshot
        seeds (dict): seeds used
        outputs (list): paths of the written files
        wall_time (float): seconds spent

    Returns:
        str: manifest path
    """
    manifest = {
        "format_version": outbreakpred.format_version,
        "command": command,
        "version": version_string(),
        "config": config,
        "seeds": seeds,
        "outputs": {os.path.basename(path): file_hash(path) for path in outputs},
    }
    manifest["content_hash"] = hashlib.sha256(json.dumps(manifest, sort_keys=True).encode()).hexdigest()
    manifest["wall_time_s"] = wall_time
    filepath = os.path.join(outdir, "{0}.manifest.json".format(command))
    with open(filepath, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return filepath


def _outdir_of(path):
    outdir = os.path.dirname(os.path.abspath(path))
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _graph_provenance(graph_path, graph):
    return {"path": os.path.basename(graph_path), "graph_hash": graph.hash(), "n": graph.n}


def cmd_generate(spec, out):
    """
    Builds a network and writes it as an edge list

    Args:
        spec (outbreakpred.netgen.NetworkSpec): network to build
        out (str): edge-list path

    Returns:
        outbreakpred.netgen.Graph: the network
    """
    start = time.perf_counter()
    graph = netgen.build_network(spec)
    netgen.save_edge_list(graph, out)
    write_manifest(_outdir_of(out), "generate", spec.to_dict(), {"rng_seed": spec.rng_seed}, [out],
                   time.perf_counter() - start)
    outbreakpred.log("wrote {0} ({1} nodes, {2} edges)".format(out, graph.n, graph.num_edges))
    return graph


def cmd_simulate(graph_path, params, sim_config, runs, outdir, n_workers=None, bin_width=None):
    """
    Simulates a batch on a network and writes trajectories.jsonl, histogram.csv
    and dieout.csv (take-off threshold, die-out estimate and branching oracle)

    Args:
        graph_path (str): edge-list file
        params (outbreakpred.sim.SirParams): beta, mu
        sim_config (outbreakpred.sim.SimConfig): run settings
        runs (int): number of runs
        outdir (str): output directory
        n_workers (int): worker processes
        bin_width (int): histogram bin width

    Returns:
        outbreakpred.sim.BatchResult: the batch
    """
    start = time.perf_counter()
    os.makedirs(outdir, exist_ok=True)
    graph = netgen.load_edge_list(graph_path)
    batch = sim.run_batch(graph, params, sim_config, runs, n_workers=n_workers,
                          network=_graph_provenance(graph_path, graph))

    traj_path = os.path.join(outdir, "trajectories.jsonl")
    hist_path = os.path.join(outdir, "histogram.csv")
    dieout_path = os.path.join(outdir, "dieout.csv")
    batch.save(traj_path)
    hist = sim.final_size_histogram(batch, bin_width=bin_width)
    hist.to_csv(hist_path)

    T = sim.transmissibility(params)
    mean_offspring = netgen.degree_stats(graph)["avg_degree"] * T
    try:
        phi_star = dataset.auto_phi_star(batch, bin_width=bin_width)
        p_dieout = sim.estimate_dieout_prob(batch, phi_star)
    except dataset.UnimodalError:
        phi_star, p_dieout = "undefined", "undefined"
    summary = pd.DataFrame([{"phi_star": phi_star, "p_dieout": p_dieout, "transmissibility": T,
                             "mean_offspring": mean_offspring,
                             "branching_dieout": sim.branching_dieout_prob(mean_offspring), "runs": runs}])
    with open(dieout_path, "w") as f:
        f.write("# outbreakpred format-version {0}\n".format(outbreakpred.format_version))
        summary.to_csv(f, index=False, float_format="%.10g")

    config = {"graph": batch.network, "beta": params.beta, "mu": params.mu, "runs": runs,
              "max_steps": sim_config.max_steps, "initial_infected": sim_config.initial_infected,
              "bin_width": hist.bin_width}
    write_manifest(outdir, "simulate", config, {"master_seed": sim_config.master_seed},
                   [traj_path, hist_path, dieout_path], time.perf_counter() - start)
    return batch


def cmd_build_dataset(trajectories_path, t_o, labeling, out, split_ratios=(0.8, 0.1, 0.1), split_seed=0):
    """
    Labels and truncates a trajectory file into a dataset file

    Args:
        trajectories_path (str): trajectories.jsonl from cmd_simulate
        t_o (int): observation step
        labeling (outbreakpred.dataset.LabelingConfig): labeling rule
        out (str): dataset JSONL path
        split_ratios (tuple): split fractions
        split_seed (int): split seed

    Returns:
        outbreakpred.dataset.Dataset: the dataset
    """
    start = time.perf_counter()
    batch = sim.BatchResult.load(trajectories_path)
    ds = dataset.build_dataset(batch, t_o, labeling, split_ratios, split_seed)
    ds.save(out)
    config = {"trajectories": os.path.basename(trajectories_path), "t_o": t_o,
              "phi_star": ds.provenance["phi_star"], "split_ratios": list(split_ratios)}
    write_manifest(_outdir_of(out), "build-dataset", config, {"split_seed": split_seed}, [out],
                   time.perf_counter() - start)
    return ds


def _attach(model, graph_path):
    if isinstance(model, models.OgwnModel):
        if graph_path is None:
            raise models.ModelException("OGWN needs --graph")
        model.attach_graph(netgen.load_edge_list(graph_path))
    return model


def cmd_train(dataset_path, model_name, out, graph_path=None, seed=0, train_config=None, pretrained_path=None,
              finetune_config=None, k=5, register=False, modeldb_path=""):
    """
    Trains one model on a dataset's train/validation splits and writes its checkpoint

    Args:
        dataset_path (str): dataset JSONL
        model_name (str): CLI model name
        out (str): checkpoint path
        graph_path (str): edge list of the dataset's network (OGWN, pretrain-finetune)
        seed (int): initialization seed
        train_config (outbreakpred.models.TrainConfig): optimizer settings
        pretrained_path (str): pretrained checkpoint for pretrain-finetune
        finetune_config (outbreakpred.models.FinetuneConfig): finetuning settings
        k (int): KNN neighbor count
        register (bool): add the checkpoint to the model index
        modeldb_path (str): model index CSV, "" for the configured one

    Returns:
        outbreakpred.models.Classifier: trained model
    """
    start = time.perf_counter()
    ds = dataset.Dataset.load(dataset_path)
    pretrained = models.load_model(pretrained_path)[0] if pretrained_path else None
    model = models.build_classifier(model_name, seed=seed, k=k, pretrained=pretrained,
                                    finetune_config=finetune_config)
    graph = netgen.load_edge_list(graph_path) if graph_path else None
    if train_config is None:
        train_config = models.TrainConfig.default(seed=seed)
    model.fit(ds.split("train"), ds.split("validation"), graph=graph, train_config=train_config)
    provenance = {"kind": model_name, "t_o": ds.t_o, "graph_hash": ds.graph_hash, "dataset": file_hash(dataset_path)}
    if isinstance(model, models.PretrainFinetuneClassifier):
        provenance = dict(model.model.provenance, t_o=ds.t_o, dataset=file_hash(dataset_path))
    model.save(out, provenance)
    if register:
        modeldb.ModelDB(modeldb_path).create_entry(out)
    write_manifest(_outdir_of(out), "train", {"model": model_name, "dataset": os.path.basename(dataset_path),
                                              "train": dataclasses.asdict(train_config), "k": k},
                   {"seed": seed}, [out], time.perf_counter() - start)
    return model


def cmd_evaluate(checkpoint, dataset_path, outdir, graph_path=None, model_label=None):
    """
    Evaluates a checkpoint on a dataset's test split; writes metrics.csv and roc.json

    Args:
        checkpoint (str): checkpoint path
        dataset_path (str): dataset JSONL
        outdir (str): output directory
        graph_path (str): edge list (OGWN)
        model_label (str): model name written to the table. Defaults to the checkpoint kind.

    Returns:
        outbreakpred.evaluation.SweepResult: one-row table and ROC data
    """
    start = time.perf_counter()
    os.makedirs(outdir, exist_ok=True)
    model, provenance = models.load_model(checkpoint)
    _attach(model, graph_path)
    ds = dataset.Dataset.load(dataset_path)
    report, roc = evaluation.evaluate(model, ds.split("test"))
    label = model_label if model_label else provenance.get("kind", model.kind)
    row = {"model": label, "t_o": ds.t_o}
    row.update(report)
    result = evaluation.SweepResult(pd.DataFrame([row], columns=evaluation.metric_columns),
                                    [{"model": label, "t_o": ds.t_o, "points": roc.points()}] if roc else [])
    metrics_path = os.path.join(outdir, "metrics.csv")
    roc_path = os.path.join(outdir, "roc.json")
    result.to_csv(metrics_path)
    result.roc_to_json(roc_path)
    write_manifest(outdir, "evaluate", {"checkpoint": file_hash(checkpoint), "dataset": file_hash(dataset_path)},
                   {}, [metrics_path, roc_path], time.perf_counter() - start)
    return result


def cmd_sweep(trajectories_path, graph_path, model_names, t_o_list, labeling, outdir, seed=0, train_config=None,
              split_ratios=(0.8, 0.1, 0.1), split_seed=0, pretrained_path=None, finetune_config=None, k=5):
    """
    Retrains and evaluates every model at every observation step; writes
    metrics.csv and roc.json

    Args:
        trajectories_path (str): trajectories.jsonl
        graph_path (str): edge list of the batch's network
        model_names (list): CLI model names
        t_o_list (list): observation steps
        labeling (outbreakpred.dataset.LabelingConfig): labeling rule
        outdir (str): output directory
        seed (int): initialization seed of neural models
        train_config (outbreakpred.models.TrainConfig): optimizer settings
        split_ratios (tuple): split fractions
        split_seed (int): split seed
        pretrained_path (str): pretrained checkpoint for pretrain-finetune
        finetune_config (outbreakpred.models.FinetuneConfig): finetuning settings
        k (int): KNN neighbor count

    Returns:
        outbreakpred.evaluation.SweepResult: metric table and ROC data
    """
    start = time.perf_counter()
    os.makedirs(outdir, exist_ok=True)
    batch = sim.BatchResult.load(trajectories_path)
    graph = netgen.load_edge_list(graph_path)
    pretrained = models.load_model(pretrained_path)[0] if pretrained_path else None
    if train_config is None:
        train_config = models.TrainConfig.default(seed=seed)
    factories = {name: (lambda t_o, name=name: models.build_classifier(
        name, seed=seed, k=k, pretrained=pretrained, finetune_config=finetune_config)) for name in model_names}
    result = evaluation.sweep_observation_times(factories, batch, t_o_list, labeling, graph=graph,
                                                split_ratios=split_ratios, split_seed=split_seed,
                                                train_config=train_config)
    metrics_path = os.path.join(outdir, "metrics.csv")
    roc_path = os.path.join(outdir, "roc.json")
    result.to_csv(metrics_path)
    result.roc_to_json(roc_path)
    write_manifest(outdir, "sweep", {"models": list(model_names), "t_o": list(t_o_list),
                                     "trajectories": file_hash(trajectories_path), "train": dataclasses.asdict(train_config)},
                   {"seed": seed, "split_seed": split_seed}, [metrics_path, roc_path], time.perf_counter() - start)
    return result


def cmd_pretrain(pretrain_config, nn_seed, out, register=False, modeldb_path=""):
    """
    Runs multi-scenario pretraining and writes the checkpoint

    Args:
        pretrain_config (outbreakpred.models.PretrainConfig): grid and training settings
        nn_seed (int): initialization and shuffle seed
        out (str): checkpoint path
        register (bool): add the checkpoint to the model index
        modeldb_path (str): model index CSV, "" for the configured one

    Returns:
        outbreakpred.models.OgwnModel: pretrained model
    """
    start = time.perf_counter()
    model = models.pretrain(pretrain_config, nn_seed)
    model.save(out)
    if register:
        modeldb.ModelDB(modeldb_path).create_entry(out)
    config = {"networks": [spec.to_dict() for spec in pretrain_config.networks], "betas": list(pretrain_config.betas),
              "mu": pretrain_config.mu, "runs_per_cell": pretrain_config.runs_per_cell, "t_o": pretrain_config.t_o,
              "epochs": pretrain_config.epochs}
    write_manifest(_outdir_of(out), "pretrain", config, {"master_seed": pretrain_config.master_seed,
                                                         "nn_seed": nn_seed}, [out], time.perf_counter() - start)
    return model


def cmd_finetune(checkpoint, graph_path, dataset_path, out, finetune_config=None, register=False, modeldb_path=""):
    """
    Finetunes a pretrained checkpoint on a target dataset. `AUTOMATIC` picks the
    newest pretrained checkpoint of the model index that did not see the target network.

    Args:
        checkpoint (str): pretrained checkpoint path or AUTOMATIC
        graph_path (str): target network edge list
        dataset_path (str): target dataset JSONL
        out (str): output checkpoint path
        finetune_config (outbreakpred.models.FinetuneConfig): finetuning settings
        register (bool): add the checkpoint to the model index
        modeldb_path (str): model index CSV used for AUTOMATIC and registration, "" for the configured one

    Returns:
        outbreakpred.models.OgwnModel: finetuned model
    """
    start = time.perf_counter()
    graph = netgen.load_edge_list(graph_path)
    if checkpoint.upper() == "AUTOMATIC":
        db = modeldb.ModelDB(modeldb_path)
        checkpoint = db.get_model("pretrain", exclude_graph_hashes=[graph.hash()])
        outbreakpred.log("using pretrained checkpoint {0}".format(checkpoint))
    pretrained, _ = models.load_model(checkpoint)
    ds = dataset.Dataset.load(dataset_path)
    model = models.finetune(pretrained, graph, ds, finetune_config)
    model.provenance["t_o"] = ds.t_o
    model.save(out)
    if register:
        modeldb.ModelDB(modeldb_path).create_entry(out)
    config = dataclasses.asdict(finetune_config if finetune_config is not None else models.FinetuneConfig())
    write_manifest(_outdir_of(out), "finetune", {"checkpoint": file_hash(checkpoint),
                                                 "dataset": file_hash(dataset_path), "finetune": config},
                   {"seed": config["seed"]}, [out], time.perf_counter() - start)
    return model


def cmd_plot(input_path, out, metric="auc"):
    """
    Renders a metrics CSV, histogram CSV, trajectory CSV or ROC JSON as an SVG chart

    Args:
        input_path (str): input file
        out (str): SVG path
        metric (str): metric column for metric tables
    """
    if input_path.lower().endswith(".json"):
        with open(input_path, "r") as f:
            content = json.load(f)
        plotting.plot_roc(content.get("curves", []), out)
        return
    table = pd.read_csv(input_path, comment="#")
    if "bin_start" in table.columns:
        starts = table["bin_start"].to_numpy()
        width = int(starts[1] - starts[0]) if len(starts) > 1 else 1
        plotting.plot_histogram(starts, table["count"].to_numpy(), width, out)
    elif "run_id" in table.columns:
        plotting.plot_trajectories(table, out)
    elif "model" in table.columns:
        plotting.plot_metrics(evaluation.read_metrics_csv(input_path), out, metric)
    elif "x" in table.columns and "y" in table.columns:
        plotting.plot_lines({"line": (table["x"].to_numpy(), table["y"].to_numpy())}, out)
    else:
        raise evaluation.EvaluationException("cannot tell what to plot from the columns of {0}".format(input_path))


def cmd_compare(checkpoint, graph_path, trajectories_path, t_o_list, labeling, seeds, outdir, n_train=500,
                finetune_config=None, train_config=None, split_ratios=(0.8, 0.1, 0.1)):
    """
    Scratch OGWN against pretrain-finetune on a held-out network; writes compare.csv

    Args:
        checkpoint (str): pretrained checkpoint path
        graph_path (str): target network edge list
        trajectories_path (str): runs simulated on the target network
        t_o_list (list): observation steps
        labeling (outbreakpred.dataset.LabelingConfig): labeling rule
        seeds (list): seeds averaged over
        outdir (str): output directory
        n_train (int): target training samples
        finetune_config (outbreakpred.models.FinetuneConfig): finetuning settings
        train_config (outbreakpred.models.TrainConfig): scratch training settings
        split_ratios (tuple): split fractions

    Returns:
        pandas.DataFrame: comparison table
    """
    start = time.perf_counter()
    os.makedirs(outdir, exist_ok=True)
    pretrained, _ = models.load_model(checkpoint)
    graph = netgen.load_edge_list(graph_path)
    batch = sim.BatchResult.load(trajectories_path)
    table = evaluation.compare_pretrain_finetune(pretrained, graph, batch, t_o_list, labeling, seeds,
                                                 n_train=n_train, finetune_config=finetune_config,
                                                 train_config=train_config, split_ratios=split_ratios)
    compare_path = os.path.join(outdir, "compare.csv")
    with open(compare_path, "w") as f:
        f.write("# outbreakpred format-version {0}\n".format(outbreakpred.format_version))
        table.to_csv(f, index=False, float_format="%.10g")
    write_manifest(outdir, "compare", {"checkpoint": file_hash(checkpoint), "t_o": list(t_o_list),
                                       "n_train": n_train, "trajectories": file_hash(trajectories_path)},
                   {"seeds": list(seeds)}, [compare_path], time.perf_counter() - start)
    return table
