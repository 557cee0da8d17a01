import os
import json

import pytest

import outbreakpred
import outbreakpred.cli as cli
import outbreakpred.netgen as netgen
import outbreakpred.models as models
import outbreakpred.evaluation as evaluation


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
    monkeypatch.setattr(outbreakpred, "cache_embeddings", False)
    monkeypatch.setattr(outbreakpred, "verbose", False)


def _resolve(argv):
    return cli.resolve_config(cli.build_parser().parse_args(argv))


def test_usage_errors(capsys):
    assert(cli.main([]) == 1)
    assert(cli.main(["deploy"]) == 1)
    assert(cli.main(["generate", "--er", "--ba", "--n", "10", "--k", "2"]) == 1)

    assert(cli.main(["generate", "--er", "--n", "300"]) == 1)
    err = capsys.readouterr().err
    assert("outbreakpred: usage error: missing required setting(s): --k" in err)

    assert(cli.main(["train", "--dataset", "d.jsonl", "--model", "pretrain-finetune"]) == 1)
    assert("--pretrained" in capsys.readouterr().err)

    # abbreviations are not expanded
    assert(cli.main(["generate", "--er", "--n", "10", "--k", "2", "--ou", "x.txt"]) == 1)


def test_invalid_values(capsys, tmp_path):
    assert(cli.main(["generate", "--er", "--n", "300", "--k", "-1"]) == 2)
    assert(capsys.readouterr().err.startswith("outbreakpred: invalid k: "))

    assert(cli.main(["generate", "--er", "--n", "abc", "--k", "2"]) == 2)
    assert("outbreakpred: invalid n: cannot read 'abc'" in capsys.readouterr().err)

    assert(cli.main(["generate", "--er", "--n", "10", "--k", "20"]) == 2)
    assert("mean degree cannot exceed n - 1" in capsys.readouterr().err)

    missing = os.path.join(tmp_path, "missing.txt")
    assert(cli.main(["simulate", "--graph", missing, "--beta", "0.5"]) == 2)
    assert("outbreakpred: invalid graph: " in capsys.readouterr().err)

    # every failing field is reported
    assert(cli.main(["simulate", "--graph", missing, "--beta", "1.5", "--mu", "0"]) == 2)
    lines = capsys.readouterr().err.strip().splitlines()
    assert([line.split(":")[1].strip() for line in lines] == ["invalid graph", "invalid beta", "invalid mu"])


def test_runtime_failure(capsys, tmp_path):
    out = os.path.join(tmp_path, "ba.txt")
    assert(cli.main(["generate", "--ba", "--n", "5", "--m", "5", "--out", out]) == 3)
    assert("outbreakpred: generate failed: NetgenException" in capsys.readouterr().err)
    assert(not os.path.exists(out))


def test_config_precedence(tmp_path):
    """
    Flags beat the experiment file, which beats the defaults
    """
    filepath = os.path.join(tmp_path, "experiment.ini")
    with open(filepath, "w") as f:
        f.write("[experiment]\nkind = er\nn = 50\nk = 3\n")

    config = _resolve(["generate", "--config", filepath, "--n", "40"])
    assert(config["n"] == 40)
    assert(config.sources["n"] == "flag")
    assert(config["kind"] == "ER")
    assert(config["k"] == 3.0)
    assert(config.sources["k"] == "file")
    assert(config["out"] == "network.txt")
    assert(config.sources["seed"] == "default")

    config = _resolve(["simulate", "--graph", filepath, "--beta", "0.2"])
    assert(config["mu"] == outbreakpred.default_mu)
    assert(config["max_steps"] == outbreakpred.default_max_steps)
    assert(config["runs"] == 1000)

    assert(_resolve(["finetune", "--checkpoint", "AUTOMATIC", "--graph", filepath,
                     "--dataset", filepath])["epochs"] == 10)

    with open(filepath, "a") as f:
        f.write("temperature = 3\n")
    with pytest.raises(cli.ConfigError):
        _resolve(["generate", "--config", filepath])
    with pytest.raises(cli.ConfigError):
        _resolve(["generate", "--config", os.path.join(tmp_path, "missing.ini")])


def test_compare_budgets(tmp_path, monkeypatch):
    """
    The from-scratch baseline of compare takes the optimizer flags and its own epoch budget
    """
    filepath = os.path.join(tmp_path, "artefact.txt")
    with open(filepath, "w") as f:
        f.write("0 1\n")
    captured = {}
    monkeypatch.setattr(cli.pipeline, "cmd_compare", lambda *args, **kwargs: captured.update(kwargs))

    base = ["compare", "--checkpoint", filepath, "--graph", filepath, "--trajectories", filepath, "--t-o", "3",
            "--auto-phi"]
    cli.run_compare(_resolve(base + ["--lr", "0.01", "--batch-size", "16", "--scratch-epochs", "7"]))
    assert(captured["train_config"] == models.TrainConfig(0.01, 16, 7, outbreakpred.patience, 0))
    assert(captured["finetune_config"].epochs == 10)
    assert(captured["finetune_config"].base_learning_rate == 0.01)
    assert(captured["finetune_config"].batch_size == 16)

    cli.run_compare(_resolve(base))
    assert(captured["train_config"].max_epochs == outbreakpred.max_epochs)


def test_value_parsers():
    specs = cli._network_list("ER:n=200,avg_degree=5,rng_seed=1; BA:n=200,m=3")
    assert(specs[0] == netgen.NetworkSpec("ER", 200, avg_degree=5.0, rng_seed=1))
    assert(specs[1].kind == "BA" and specs[1].m == 3)
    with pytest.raises(ValueError):
        cli._network_list("ER:n=200,size=3")
    assert(cli._int_list("2, 4,6") == [2, 4, 6])
    assert(cli._bool("Yes") and not cli._bool("off"))
    with pytest.raises(ValueError):
        cli._bool("maybe")


def test_command_flow(tmp_path, capsys):
    """
    generate -> simulate -> build-dataset -> train -> evaluate -> plot from the command line
    """
    graph_path = os.path.join(tmp_path, "network.txt")
    sim_dir = os.path.join(tmp_path, "sim")
    dataset_path = os.path.join(tmp_path, "dataset.jsonl")
    checkpoint = os.path.join(tmp_path, "knn.fits")
    eval_dir = os.path.join(tmp_path, "eval")
    chart = os.path.join(tmp_path, "chart.svg")

    assert(cli.main(["generate", "--er", "--n", "300", "--k", "5", "--seed", "3", "--out", graph_path]) == 0)
    assert(netgen.load_edge_list(graph_path).n == 300)
    assert(os.path.exists(os.path.join(tmp_path, "generate.manifest.json")))

    assert(cli.main(["simulate", "--graph", graph_path, "--beta", "0.4", "--mu", "1", "--runs", "200",
                     "--workers", "1", "--out", sim_dir]) == 0)
    for name in ("trajectories.jsonl", "histogram.csv", "dieout.csv", "simulate.manifest.json"):
        assert(os.path.exists(os.path.join(sim_dir, name)))

    assert(cli.main(["build-dataset", "--trajectories", os.path.join(sim_dir, "trajectories.jsonl"),
                     "--t-o", "3", "--auto-phi", "--out", dataset_path]) == 0)
    assert(cli.main(["train", "--dataset", dataset_path, "--model", "knn", "--knn-k", "3",
                     "--out", checkpoint]) == 0)
    model, provenance = models.load_model(checkpoint)
    assert(isinstance(model, models.KnnClassifier))
    assert(provenance["t_o"] == 3)

    assert(cli.main(["evaluate", "--checkpoint", checkpoint, "--dataset", dataset_path, "--out", eval_dir]) == 0)
    table = evaluation.read_metrics_csv(os.path.join(eval_dir, "metrics.csv"))
    assert(table["model"].tolist() == ["knn"])
    assert(0.0 <= table["auc"][0] <= 1.0)

    assert(cli.main(["plot", "--input", os.path.join(eval_dir, "roc.json"), "--out", chart]) == 0)
    assert(os.path.exists(chart))

    with open(os.path.join(eval_dir, "evaluate.manifest.json")) as f:
        manifest = json.load(f)
    assert(manifest["command"] == "evaluate")
    assert(sorted(manifest["outputs"]) == ["metrics.csv", "roc.json"])
    assert(capsys.readouterr().err == "")


if __name__ == "__main__":
    test_value_parsers()
