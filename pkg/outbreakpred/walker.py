"""
Runs multi-stage experiments described by JSON recipes. A recipe lists
pipeline steps in order; each step reads the artefacts produced by earlier
steps (through the walker state) and writes its own into the output directory.
"""
import os
import json

import outbreakpred
import outbreakpred.netgen as netgen
import outbreakpred.sim as sim
import outbreakpred.dataset as dataset
import outbreakpred.models as models
import outbreakpred.graphwave as graphwave
import outbreakpred.pipeline as pipeline

recipe_dir = os.path.join(os.path.dirname(__file__), "recipe_templates")


class WalkerException(Exception):
    """Exception class for recipe handling."""


def _from_state(state, keywords, key):
    """
    Keyword value, or the artefact of that name from earlier steps when the
    keyword is missing or AUTOMATIC
    """
    value = keywords.pop(key, "AUTOMATIC")
    if isinstance(value, str) and value.upper() == "AUTOMATIC":
        if key not in state:
            raise WalkerException("no earlier step produced a {0}".format(key))
        return state[key]
    return value


def _labeling(keywords):
    phi_star = keywords.pop("phi_star", None)
    auto_phi = keywords.pop("auto_phi", phi_star is None)
    return dataset.LabelingConfig(phi_star=phi_star, auto_phi=auto_phi)


def _train_config(keywords, seed):
    values = {name: keywords.pop(name) for name in ("learning_rate", "batch_size", "max_epochs", "patience")
              if name in keywords}
    return models.TrainConfig.default(seed=seed, **values)


def _finetune_config(keywords, seed):
    values = keywords.pop("finetune", {})
    if "trainable" in values and values["trainable"] is not None:
        values["trainable"] = tuple(values["trainable"])
    return models.FinetuneConfig(seed=seed, **values)


def _ogwn_config(values):
    if not values:
        return models.OgwnConfig()
    wavelet = graphwave.WaveletConfig(**values.get("wavelet", {}))
    return models.OgwnConfig(wavelet, values.get("hidden_dim", 64), tuple(values.get("mlp_hidden", (64,))))


def _check_leftovers(name, keywords):
    if keywords:
        raise WalkerException("step {0} got unknown keywords {1}".format(name, sorted(keywords)))


def step_generate(state, outputdir, filename="network.txt", **keywords):
    spec = netgen.NetworkSpec(**keywords)
    out = os.path.join(outputdir, filename)
    pipeline.cmd_generate(spec, out)
    state["graph"] = out
    return state


def step_simulate(state, outputdir, beta, mu=None, runs=1000, master_seed=0, max_steps=None, initial_infected=1,
                  seed_selection="uniform", n_workers=None, bin_width=None, subdir="", **keywords):
    graph = _from_state(state, keywords, "graph")
    _check_leftovers("simulate", keywords)
    params = sim.SirParams(beta, outbreakpred.default_mu if mu is None else mu)
    overrides = {} if max_steps is None else {"max_steps": max_steps}
    sim_config = sim.SimConfig.default(initial_infected=initial_infected, seed_selection=seed_selection,
                                       master_seed=master_seed, **overrides)
    outdir = os.path.join(outputdir, subdir)
    pipeline.cmd_simulate(graph, params, sim_config, runs, outdir, n_workers=n_workers, bin_width=bin_width)
    state["trajectories"] = os.path.join(outdir, "trajectories.jsonl")
    state["histogram"] = os.path.join(outdir, "histogram.csv")
    return state


def step_build_dataset(state, outputdir, t_o, filename=None, split_ratios=(0.8, 0.1, 0.1), split_seed=0,
                       **keywords):
    trajectories = _from_state(state, keywords, "trajectories")
    labeling = _labeling(keywords)
    _check_leftovers("build_dataset", keywords)
    out = os.path.join(outputdir, filename if filename else "dataset_t{0}.jsonl".format(t_o))
    pipeline.cmd_build_dataset(trajectories, t_o, labeling, out, tuple(split_ratios), split_seed)
    state["dataset"] = out
    return state


def step_train(state, outputdir, model, seed=0, k=5, filename=None, register=False, **keywords):
    ds = _from_state(state, keywords, "dataset")
    graph = keywords.pop("graph", state.get("graph"))
    pretrained = state.get("pretrained") if model == "pretrain-finetune" else None
    train_config = _train_config(keywords, seed)
    finetune_config = _finetune_config(keywords, seed)
    _check_leftovers("train", keywords)
    out = os.path.join(outputdir, filename if filename else "{0}.fits".format(model))
    pipeline.cmd_train(ds, model, out, graph_path=graph, seed=seed, train_config=train_config,
                       pretrained_path=pretrained, finetune_config=finetune_config, k=k,
                       register=register)
    state["checkpoint"] = out
    return state


def step_evaluate(state, outputdir, subdir="evaluation", **keywords):
    checkpoint = _from_state(state, keywords, "checkpoint")
    ds = _from_state(state, keywords, "dataset")
    graph = state.get("graph")
    _check_leftovers("evaluate", keywords)
    outdir = os.path.join(outputdir, subdir)
    pipeline.cmd_evaluate(checkpoint, ds, outdir, graph_path=graph)
    state["metrics"] = os.path.join(outdir, "metrics.csv")
    state["roc"] = os.path.join(outdir, "roc.json")
    return state


def step_sweep(state, outputdir, models, t_o, seed=0, k=5, split_ratios=(0.8, 0.1, 0.1), split_seed=0,
               subdir="sweep", **keywords):
    trajectories = _from_state(state, keywords, "trajectories")
    graph = _from_state(state, keywords, "graph")
    labeling = _labeling(keywords)
    train_config = _train_config(keywords, seed)
    finetune_config = _finetune_config(keywords, seed)
    _check_leftovers("sweep", keywords)
    outdir = os.path.join(outputdir, subdir)
    pipeline.cmd_sweep(trajectories, graph, models, t_o, labeling, outdir, seed=seed, train_config=train_config,
                       split_ratios=tuple(split_ratios), split_seed=split_seed,
                       pretrained_path=state.get("pretrained"), finetune_config=finetune_config, k=k)
    state["metrics"] = os.path.join(outdir, "metrics.csv")
    state["roc"] = os.path.join(outdir, "roc.json")
    return state


def step_pretrain(state, outputdir, networks, betas, mu=0.1, runs_per_cell=2000, t_o=10, epochs=100,
                  master_seed=0, nn_seed=0, split_ratios=(0.8, 0.1, 0.1), ogwn=None, learning_rate=1e-3,
                  batch_size=64, patience=10, filename="pretrained.fits", register=False):
    config = models.PretrainConfig(tuple(netgen.NetworkSpec(**spec) for spec in networks), tuple(betas), mu,
                                   runs_per_cell, t_o, epochs, master_seed, tuple(split_ratios),
                                   _ogwn_config(ogwn), learning_rate, batch_size, patience)
    out = os.path.join(outputdir, filename)
    pipeline.cmd_pretrain(config, nn_seed, out, register=register)
    state["pretrained"] = out
    return state


def step_finetune(state, outputdir, filename="finetuned.fits", seed=0, register=False, **keywords):
    pretrained = keywords.pop("pretrained", state.get("pretrained", "AUTOMATIC"))
    graph = _from_state(state, keywords, "graph")
    ds = _from_state(state, keywords, "dataset")
    if keywords.get("trainable") is not None:
        keywords["trainable"] = tuple(keywords["trainable"])
    finetune_config = models.FinetuneConfig(seed=seed, **keywords)
    out = os.path.join(outputdir, filename)
    pipeline.cmd_finetune(pretrained, graph, ds, out, finetune_config, register=register)
    state["checkpoint"] = out
    return state


def step_compare(state, outputdir, t_o, seeds, n_train=500, split_ratios=(0.8, 0.1, 0.1), subdir="compare",
                 **keywords):
    pretrained = _from_state(state, keywords, "pretrained")
    graph = _from_state(state, keywords, "graph")
    trajectories = _from_state(state, keywords, "trajectories")
    labeling = _labeling(keywords)
    train_config = _train_config(keywords, seeds[0])
    finetune_config = _finetune_config(keywords, seeds[0])
    _check_leftovers("compare", keywords)
    pipeline.cmd_compare(pretrained, graph, trajectories, t_o, labeling, seeds, os.path.join(outputdir, subdir),
                         n_train=n_train, finetune_config=finetune_config, train_config=train_config,
                         split_ratios=tuple(split_ratios))
    state["compare"] = os.path.join(outputdir, subdir, "compare.csv")
    return state


def step_plot(state, outputdir, input="metrics", filename=None, metric="auc"):
    source = state[input] if input in state else input
    out = os.path.join(outputdir, filename if filename else "{0}.svg".format(input))
    pipeline.cmd_plot(source, out, metric)
    state.setdefault("plots", []).append(out)
    return state


all_steps = {
    "generate": step_generate,
    "simulate": step_simulate,
    "build_dataset": step_build_dataset,
    "train": step_train,
    "evaluate": step_evaluate,
    "sweep": step_sweep,
    "pretrain": step_pretrain,
    "finetune": step_finetune,
    "compare": step_compare,
    "plot": step_plot,
}


def classify_input(filepath):
    """
    Which walker artefact an input file is

    Args:
        filepath (str): path to an input file

    Returns:
        str: one of graph, trajectories, dataset, pretrained
    """
    lower = filepath.lower()
    if lower.endswith(".fits"):
        return "pretrained"
    if lower.endswith(".jsonl"):
        with open(filepath, "r") as f:
            header = json.loads(f.readline())
        kind = header.get("kind", "")
        if kind == "dataset":
            return "dataset"
        if kind == "trajectories":
            return "trajectories"
        raise WalkerException("{0} is neither a trajectory nor a dataset file".format(filepath))
    return "graph"


def load_template(template):
    """
    Args:
        template (str or dict): template name in recipe_templates, a filepath, or a loaded recipe

    Returns:
        dict: the template
    """
    if isinstance(template, dict):
        return template
    if os.path.sep not in template:
        template = os.path.join(recipe_dir, template)
    with open(template, "r") as f:
        return json.load(f)


def autogen_recipe(template, outputdir, inputs=()):
    """
    Fills a template with inputs and an output directory

    Args:
        template (str or dict): template name, filepath or loaded template
        outputdir (str): output directory
        inputs (list): input artefacts available before the first step

    Returns:
        dict: the recipe
    """
    recipe = json.loads(json.dumps(load_template(template)))
    recipe["template"] = False
    recipe["inputs"] = list(recipe.get("inputs", [])) + [os.path.abspath(path) for path in inputs]
    recipe["outputdir"] = os.path.abspath(outputdir)
    for step in recipe["steps"]:
        if step["name"] not in all_steps:
            raise WalkerException("unknown step {0} in recipe {1}".format(step["name"], recipe["name"]))
    return recipe


def run_recipe(recipe, save_recipe_file=True):
    """
    Run the specified recipe

    Args:
        recipe (dict or str): either the filepath to the recipe or the already loaded in recipe
        save_recipe_file (bool): saves the recipe as a JSON file in the outputdir (true by default)

    Returns:
        dict: artefact paths produced by the steps
    """
    if isinstance(recipe, str):
        with open(recipe, "r") as f:
            recipe = json.load(f)
    if recipe.get("template", False):
        raise WalkerException("recipe {0} is a template; fill it with autogen_recipe first".format(recipe["name"]))

    # configure pipeline as needed
    for setting in recipe["drpconfig"]:
        # equivalent to outbreakpred.setting = recipe['drpconfig'][setting]
        setattr(outbreakpred, setting, recipe["drpconfig"][setting])

    outputdir = recipe["outputdir"]
    os.makedirs(outputdir, exist_ok=True)

    state = {}
    for filepath in recipe["inputs"]:
        state[classify_input(filepath)] = filepath

    if save_recipe_file:
        recipe_filepath = os.path.join(outputdir, "{0}_recipe.json".format(recipe["name"]))
        with open(recipe_filepath, "w") as json_file:
            json.dump(recipe, json_file, indent=4)

    tot_steps = len(recipe["steps"])
    for i, step in enumerate(recipe["steps"]):
        print("Walker step {0}/{1}: {2}".format(i + 1, tot_steps, step["name"]))
        if step.get("skip", False):
            continue
        step_func = all_steps[step["name"]]
        kwargs = dict(step.get("keywords", {}))
        state = step_func(state, outputdir, **kwargs)

    return state
