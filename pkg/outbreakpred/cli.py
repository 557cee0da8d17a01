"""
Command-line entry point `outbreakpred`.

Every subcommand takes its settings from flags, from the `[experiment]` section
of an INI file given with --config, or from built-in defaults, in that order of
precedence. Exit codes: 0 success, 1 usage error, 2 invalid configuration,
3 runtime failure.
"""
import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field

import outbreakpred
import outbreakpred.check as check
import outbreakpred.netgen as netgen
import outbreakpred.sim as sim
import outbreakpred.dataset as dataset
import outbreakpred.graphwave as graphwave
import outbreakpred.nn as nn
import outbreakpred.models as models
import outbreakpred.evaluation as evaluation
import outbreakpred.pipeline as pipeline
import outbreakpred.walker as walker


class UsageError(Exception):
    """Raised for malformed command lines and missing required settings."""


class ConfigError(Exception):
    """
    Raised when settings fail validation; holds every (field, message) pair

    Args:
        errors (list): (field, message) tuples
    """
    def __init__(self, errors):
        super().__init__("; ".join("{0}: {1}".format(name, msg) for name, msg in errors))
        self.errors = errors


class _FieldError(Exception):
    pass


runtime_errors = (netgen.NetgenException, sim.SimException, dataset.DatasetException,
                  graphwave.GraphWaveException, nn.NNException, models.ModelException,
                  evaluation.EvaluationException, walker.WalkerException, check.CheckException,
                  OSError, ValueError, KeyError)


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser whose errors become UsageError instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(message)


######################## value conversion and validation ########################

def _bool(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean, got {0!r}".format(text))


def _items(text):
    return [item.strip() for item in str(text).split(",") if item.strip()]


def _int_list(text):
    return [int(item) for item in _items(text)]


def _float_list(text):
    return [float(item) for item in _items(text)]


def _network_list(text):
    """
    Network specs written as `KIND:key=value,...` joined by `;`,
    e.g. `ER:n=2000,avg_degree=5,rng_seed=11;BA:n=2000,m=3,rng_seed=12`
    """
    specs = []
    for item in str(text).split(";"):
        if not item.strip():
            continue
        kind, _, rest = item.partition(":")
        values = {"kind": kind.strip().upper()}
        for pair in _items(rest):
            key, _, value = pair.partition("=")
            key = key.strip()
            if key in ("avg_degree", "p"):
                values[key] = float(value)
            elif key in ("n", "m", "k", "rng_seed"):
                values[key] = int(value)
            else:
                raise ValueError("unknown network field {0}".format(key))
        specs.append(netgen.NetworkSpec(**values))
    return specs


def _upper(text):
    return str(text).strip().upper()


def _v_kind(value, name):
    if value not in ("ER", "BA", "WS"):
        raise _FieldError("must be ER, BA or WS")


def _v_positive(value, name):
    check.real_positive_scalar(value, name, _FieldError)


def _v_positive_int(value, name):
    check.positive_scalar_integer(value, name, _FieldError)


def _v_nonnegative_int(value, name):
    check.nonnegative_scalar_integer(value, name, _FieldError)


def _v_probability(value, name):
    check.probability(value, name, _FieldError)


def _v_rate(value, name):
    check.probability(value, name, _FieldError, allow_zero=False)


def _v_exists(value, name):
    if not os.path.exists(value):
        raise _FieldError("{0} does not exist".format(value))


def _v_checkpoint(value, name):
    if value.upper() != "AUTOMATIC":
        _v_exists(value, name)


def _v_model(value, name):
    if value not in models.model_names:
        raise _FieldError("unknown model {0}; expected one of {1}".format(value, ", ".join(models.model_names)))


def _v_models(value, name):
    if len(value) == 0:
        raise _FieldError("needs at least one model")
    for item in value:
        _v_model(item, name)


def _v_steps(value, name):
    if len(value) == 0:
        raise _FieldError("needs at least one observation step")
    for item in value:
        _v_nonnegative_int(item, name)


def _v_split(value, name):
    if len(value) != 3 or min(value) < 0 or abs(sum(value) - 1.0) > 1e-9:
        raise _FieldError("must be three non-negative fractions summing to 1")


def _v_betas(value, name):
    if len(value) == 0:
        raise _FieldError("needs at least one beta")
    for item in value:
        _v_probability(item, name)


def _v_seeds(value, name):
    if len(value) == 0:
        raise _FieldError("needs at least one seed")
    for item in value:
        _v_nonnegative_int(item, name)


def _v_metric(value, name):
    if value not in evaluation.metric_columns[2:]:
        raise _FieldError("unknown metric {0}".format(value))


def _v_any(value, name):
    pass


@dataclass(frozen=True)
class Field:
    """
    One setting: converter from text, default (callable for config-backed defaults) and validator
    """
    convert: object
    default: object
    validate: object
    help: str = ""


fields = {
    "kind": Field(_upper, None, _v_kind, "network kind ER, BA or WS"),
    "n": Field(int, None, _v_positive_int, "node count"),
    "k": Field(float, None, _v_positive, "ER mean degree"),
    "m": Field(int, None, _v_positive_int, "BA attachment count"),
    "ring_k": Field(int, None, _v_positive_int, "WS ring degree"),
    "p": Field(float, None, _v_probability, "WS rewiring probability"),
    "graph": Field(str, None, _v_exists, "edge-list file"),
    "beta": Field(float, None, _v_probability, "per-edge transmission probability"),
    "mu": Field(float, lambda: outbreakpred.default_mu, _v_rate, "per-step recovery probability"),
    "runs": Field(int, 1000, _v_positive_int, "number of simulated runs"),
    "max_steps": Field(int, lambda: outbreakpred.default_max_steps, _v_positive_int, "step cap per run"),
    "initial_infected": Field(int, 1, _v_positive_int, "seed count per run"),
    "seed_node": Field(int, None, _v_nonnegative_int, "fixed seed node"),
    "workers": Field(int, lambda: outbreakpred.n_workers, _v_positive_int, "worker processes"),
    "bin_width": Field(int, None, _v_positive_int, "histogram bin width"),
    "trajectories": Field(str, None, _v_exists, "trajectory JSONL"),
    "t_o": Field(_int_list, None, _v_steps, "observation step(s), comma separated"),
    "phi_star": Field(float, None, _v_positive, "outbreak threshold"),
    "auto_phi": Field(_bool, False, _v_any, "derive the threshold from the histogram valley"),
    "split": Field(_float_list, [0.8, 0.1, 0.1], _v_split, "train,validation,test fractions"),
    "split_seed": Field(int, 0, _v_nonnegative_int, "split seed"),
    "dataset": Field(str, None, _v_exists, "dataset JSONL"),
    "model": Field(str, None, _v_model, "model name"),
    "models": Field(_items, None, _v_models, "model names, comma separated"),
    "pretrained": Field(str, None, _v_exists, "pretrained checkpoint"),
    "checkpoint": Field(str, None, _v_checkpoint, "checkpoint file (AUTOMATIC for finetune)"),
    "knn_k": Field(int, 5, _v_positive_int, "KNN neighbor count"),
    "epochs": Field(int, lambda: outbreakpred.max_epochs, _v_nonnegative_int, "training epochs"),
    "scratch_epochs": Field(int, lambda: outbreakpred.max_epochs, _v_nonnegative_int,
                            "epochs of the from-scratch baseline (--epochs sets the finetuning budget)"),
    "lr": Field(float, lambda: outbreakpred.learning_rate, _v_positive, "learning rate"),
    "batch_size": Field(int, lambda: outbreakpred.batch_size, _v_positive_int, "minibatch size"),
    "patience": Field(int, lambda: outbreakpred.patience, _v_nonnegative_int, "early stopping patience"),
    "lr_multiplier": Field(float, 0.1, _v_positive, "finetune learning-rate multiplier"),
    "trainable": Field(_items, None, _v_any, "parameter prefixes updated when finetuning"),
    "register": Field(_bool, False, _v_any, "add the checkpoint to the model index"),
    "networks": Field(_network_list, None, _v_any, "pretraining networks KIND:key=value,...;..."),
    "betas": Field(_float_list, None, _v_betas, "pretraining betas, comma separated"),
    "runs_per_cell": Field(int, 2000, _v_positive_int, "runs per pretraining cell"),
    "nn_seed": Field(int, None, _v_nonnegative_int, "network initialization seed"),
    "seeds": Field(_int_list, [0, 1, 2, 3, 4], _v_seeds, "comparison seeds"),
    "n_train": Field(int, 500, _v_positive_int, "target training samples"),
    "input": Field(str, None, _v_exists, "file to plot"),
    "metric": Field(str, "auc", _v_metric, "metric to plot"),
    "recipe": Field(str, None, _v_any, "recipe template name or file"),
    "inputs": Field(_items, [], _v_any, "input artefacts of the recipe"),
    "seed": Field(int, 0, _v_nonnegative_int, "global seed"),
    "out": Field(str, None, _v_any, "output file or directory"),
}

_training = ["epochs", "lr", "batch_size", "patience"]
_labeling = ["phi_star", "auto_phi"]

# (required, optional, default output) per subcommand
commands = {
    "generate": (["kind", "n"], ["k", "m", "ring_k", "p"], "network.txt"),
    "simulate": (["graph", "beta"], ["mu", "runs", "max_steps", "initial_infected", "seed_node", "workers",
                                     "bin_width"], "."),
    "build-dataset": (["trajectories", "t_o"], _labeling + ["split", "split_seed"], "dataset.jsonl"),
    "train": (["dataset", "model"], ["graph", "pretrained", "knn_k", "lr_multiplier", "register"] + _training,
              "model.fits"),
    "evaluate": (["checkpoint", "dataset"], ["graph"], "."),
    "sweep": (["trajectories", "graph", "models", "t_o"], _labeling + ["split", "split_seed", "knn_k", "pretrained",
                                                                      "lr_multiplier"] + _training, "."),
    "pretrain": (["networks", "betas", "t_o"], ["mu", "runs_per_cell", "split", "nn_seed", "register"] + _training,
                 "pretrained.fits"),
    "finetune": (["checkpoint", "graph", "dataset"], ["lr_multiplier", "trainable", "register"] + _training,
                 "finetuned.fits"),
    "compare": (["checkpoint", "graph", "trajectories", "t_o"],
                _labeling + ["seeds", "n_train", "split", "lr_multiplier", "scratch_epochs"] + _training, "."),
    "plot": (["input"], ["metric"], "chart.svg"),
    "run": (["recipe"], ["inputs"], "outbreakpred_run"),
}

# finetuning is short by default
command_defaults = {"finetune": {"epochs": 10}, "compare": {"epochs": 10}}

_flags = {"kind": None, "auto_phi": None, "register": None}


@dataclass
class ExperimentConfig:
    """
    Resolved settings of one subcommand

    Args:
        command (str): subcommand
        values (dict): setting name -> typed value
        sources (dict): setting name -> "flag", "file" or "default"
    """
    command: str
    values: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[name]

    def get(self, name, default=None):
        value = self.values.get(name)
        return default if value is None else value



def read_experiment_file(filepath):
    """
    Reads the [experiment] section of an INI file

    Args:
        filepath (str): path

    Returns:
        dict: setting name -> raw text
    """
    if not os.path.exists(filepath):
        raise ConfigError([("config", "{0} does not exist".format(filepath))])
    parser = configparser.ConfigParser()
    try:
        parser.read(filepath)
    except configparser.Error as err:
        raise ConfigError([("config", str(err))])
    if not parser.has_section("experiment"):
        raise ConfigError([("config", "{0} has no [experiment] section".format(filepath))])
    return {key.replace("-", "_"): value for key, value in parser.items("experiment")}


def resolve_config(args):
    """
    Merges flags over the experiment file over defaults, converts and validates every field

    Args:
        args (argparse.Namespace): parsed command line

    Returns:
        outbreakpred.cli.ExperimentConfig: resolved settings
    """
    required, optional, default_out = commands[args.command]
    names = required + optional + ["seed", "out"]
    from_file = read_experiment_file(args.config) if args.config else {}
    errors = [(name, "unknown setting") for name in sorted(from_file) if name not in fields]

    config = ExperimentConfig(args.command)
    for name in names:
        spec = fields[name]
        raw = getattr(args, name, None)
        source = "flag"
        if raw is None and name in from_file:
            raw, source = from_file[name], "file"
        if raw is None:
            default = command_defaults.get(args.command, {}).get(name, spec.default)
            if name == "out":
                default = default_out
            config.values[name] = default() if callable(default) else default
            config.sources[name] = "default"
            continue
        try:
            config.values[name] = spec.convert(raw)
        except (ValueError, TypeError, netgen.NetgenException) as err:
            errors.append((name, "cannot read {0!r}: {1}".format(raw, err)))
            continue
        config.sources[name] = source

    missing = [name for name in required if config.values.get(name) is None and
               not any(err[0] == name for err in errors)]
    missing += _conditional_missing(config)
    if missing:
        raise UsageError("missing required setting(s): {0}".format(
            ", ".join("--" + name.replace("_", "-") for name in missing)))

    for name in names:
        value = config.values.get(name)
        if value is None or any(err[0] == name for err in errors):
            continue
        try:
            fields[name].validate(value, name)
        except _FieldError as err:
            errors.append((name, str(err)))
    errors += _cross_field_errors(config)
    if errors:
        raise ConfigError(errors)
    return config


def _conditional_missing(config):
    values = config.values
    if config.command == "generate":
        needed = {"ER": ["k"], "BA": ["m"], "WS": ["ring_k", "p"]}.get(values.get("kind"), [])
        return [name for name in needed if values.get(name) is None]
    if config.command == "train" and values.get("model") == "pretrain-finetune" and values.get("pretrained") is None:
        return ["pretrained"]
    return []


def _cross_field_errors(config):
    values = config.values
    errors = []
    if "phi_star" in values and values.get("phi_star") is None and not values.get("auto_phi"):
        errors.append(("phi_star", "set --phi-star or --auto-phi"))
    if values.get("seed_node") is not None and values.get("initial_infected") != 1:
        errors.append(("seed_node", "a fixed seed node needs initial_infected = 1"))
    if config.command in ("build-dataset", "pretrain") and values.get("t_o") and len(values["t_o"]) != 1:
        errors.append(("t_o", "{0} takes a single observation step".format(config.command)))
    if config.command == "generate" and values.get("kind") == "ER" and values.get("k") and values.get("n"):
        if values["k"] > values["n"] - 1:
            errors.append(("k", "mean degree cannot exceed n - 1"))
    return errors


######################## parser ########################

def build_parser():
    """
    Returns:
        outbreakpred.cli.ArgumentParser: parser with one subparser per command
    """
    common = ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--seed", default=None, help="global seed")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--config", default=None, help="INI file with an [experiment] section")

    parser = ArgumentParser(prog="outbreakpred", allow_abbrev=False, description="Predict stochastic take-off of spreading on networks")
    parser.add_argument("--version", action="version", version=outbreakpred.__version__)
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    for command, (required, optional, _) in commands.items():
        sub = subparsers.add_parser(command, parents=[common], allow_abbrev=False, help="{0} stage".format(command))
        for name in required + optional:
            if name == "kind":
                group = sub.add_mutually_exclusive_group()
                for kind in ("ER", "BA", "WS"):
                    group.add_argument("--" + kind.lower(), dest="kind", action="store_const", const=kind,
                                       help="{0} network".format(kind))
            elif name in ("auto_phi", "register"):
                sub.add_argument("--" + name.replace("_", "-"), dest=name, action="store_const", const=True,
                                 default=None, help=fields[name].help)
            else:
                sub.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=fields[name].help)
    return parser


######################## commands ########################

def _labeling(config):
    return dataset.LabelingConfig(phi_star=config.get("phi_star"), auto_phi=bool(config.get("auto_phi")))


def _train_config(config):
    return models.TrainConfig(config["lr"], config["batch_size"], config["epochs"], config["patience"], config["seed"])


def _finetune_config(config):
    trainable = tuple(config["trainable"]) if config.get("trainable") else None
    return models.FinetuneConfig(config["epochs"], config["lr_multiplier"], config["lr"], trainable,
                                 config["batch_size"], config["patience"], config["seed"])


def run_generate(config):
    spec = netgen.NetworkSpec(config["kind"], config["n"], avg_degree=config.get("k", 0.0), m=config.get("m", 0),
                              k=config.get("ring_k", 0), p=config.get("p", 0.0), rng_seed=config["seed"])
    pipeline.cmd_generate(spec, config["out"])


def run_simulate(config):
    params = sim.SirParams(config["beta"], config["mu"])
    seed_node = config.get("seed_node")
    sim_config = sim.SimConfig(config["max_steps"], config["initial_infected"],
                               "uniform" if seed_node is None else seed_node, config["seed"])
    pipeline.cmd_simulate(config["graph"], params, sim_config, config["runs"], config["out"],
                          n_workers=config["workers"], bin_width=config.get("bin_width"))


def run_build_dataset(config):
    pipeline.cmd_build_dataset(config["trajectories"], config["t_o"][0], _labeling(config), config["out"],
                               tuple(config["split"]), config["split_seed"])


def run_train(config):
    pipeline.cmd_train(config["dataset"], config["model"], config["out"], graph_path=config.get("graph"),
                       seed=config["seed"], train_config=_train_config(config),
                       pretrained_path=config.get("pretrained"), finetune_config=_finetune_config(config),
                       k=config["knn_k"], register=config["register"])


def run_evaluate(config):
    pipeline.cmd_evaluate(config["checkpoint"], config["dataset"], config["out"], graph_path=config.get("graph"))


def run_sweep(config):
    pipeline.cmd_sweep(config["trajectories"], config["graph"], config["models"], config["t_o"], _labeling(config),
                       config["out"], seed=config["seed"], train_config=_train_config(config),
                       split_ratios=tuple(config["split"]), split_seed=config["split_seed"],
                       pretrained_path=config.get("pretrained"), finetune_config=_finetune_config(config),
                       k=config["knn_k"])


def run_pretrain(config):
    pretrain_config = models.PretrainConfig(tuple(config["networks"]), tuple(config["betas"]), config["mu"],
                                            config["runs_per_cell"], config["t_o"][0], config["epochs"],
                                            config["seed"], tuple(config["split"]), models.OgwnConfig(),
                                            config["lr"], config["batch_size"], config["patience"])
    nn_seed = config.get("nn_seed", config["seed"])
    pipeline.cmd_pretrain(pretrain_config, nn_seed, config["out"], register=config["register"])


def run_finetune(config):
    pipeline.cmd_finetune(config["checkpoint"], config["graph"], config["dataset"], config["out"],
                          _finetune_config(config), register=config["register"])


def run_compare(config):
    # same optimizer settings as finetuning, own epoch budget
    scratch = models.TrainConfig(config["lr"], config["batch_size"], config["scratch_epochs"], config["patience"],
                                 config["seed"])
    pipeline.cmd_compare(config["checkpoint"], config["graph"], config["trajectories"], config["t_o"],
                         _labeling(config), config["seeds"], config["out"], n_train=config["n_train"],
                         finetune_config=_finetune_config(config), train_config=scratch,
                         split_ratios=tuple(config["split"]))


def run_plot(config):
    pipeline.cmd_plot(config["input"], config["out"], config["metric"])


def run_recipe(config):
    recipe = walker.autogen_recipe(config["recipe"], config["out"], config["inputs"])
    walker.run_recipe(recipe)


runners = {
    "generate": run_generate,
    "simulate": run_simulate,
    "build-dataset": run_build_dataset,
    "train": run_train,
    "evaluate": run_evaluate,
    "sweep": run_sweep,
    "pretrain": run_pretrain,
    "finetune": run_finetune,
    "compare": run_compare,
    "plot": run_plot,
    "run": run_recipe,
}


def main(argv=None):
    """
    Runs one subcommand

    Args:
        argv (list): arguments without the program name, defaults to sys.argv[1:]

    Returns:
        int: exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = resolve_config(args)
    except UsageError as err:
        print("outbreakpred: usage error: {0}".format(err), file=sys.stderr)
        return 1
    except ConfigError as err:
        for name, message in err.errors:
            print("outbreakpred: invalid {0}: {1}".format(name, message), file=sys.stderr)
        return 2

    try:
        runners[config.command](config)
    except runtime_errors as err:
        print("outbreakpred: {0} failed: {1}: {2}".format(config.command, type(err).__name__, err), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
