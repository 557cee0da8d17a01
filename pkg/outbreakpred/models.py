"""
Outbreak predictors behind one classifier contract: surveillance thresholds (ST),
k-nearest neighbors (KNN), the convolutional Outbreak-CNN (OCNN), the GraphWave +
BiGRU Outbreak-GWN (OGWN), and supervised multi-scenario pretraining followed by
finetuning on a separate target network.
"""
import copy
import warnings
from dataclasses import dataclass, field

import numpy as np

import outbreakpred
import outbreakpred.check as check
import outbreakpred.netgen as netgen
import outbreakpred.sim as sim
import outbreakpred.dataset as dataset
import outbreakpred.graphwave as graphwave
import outbreakpred.nn as nn
import outbreakpred.evaluation as evaluation


class ModelException(Exception):
    """Exception class for the models module."""


class TrainingDivergence(ModelException):
    """Raised when the training loss or a gradient becomes non-finite."""


class ProvenanceError(ModelException):
    """Raised when finetuning data comes from a network used for pretraining."""


model_names = ("st5", "st15", "st25", "knn", "ocnn", "ogwn", "pretrain-finetune")


def _observed(item):
    # accept LabeledSample or ObservedSequence
    return item.observed if isinstance(item, dataset.LabeledSample) else item


def _labels(samples):
    return np.array([sample.label for sample in samples], dtype=np.float64)


class Classifier():
    """
    Common interface of every predictor: fit on labeled samples, emit outbreak
    probabilities in [0, 1]
    """
    kind = ""

    def fit(self, train, val, graph=None, train_config=None):
        """
        Args:
            train (list): LabeledSample training samples
            val (list): LabeledSample validation samples
            graph (outbreakpred.netgen.Graph): network the samples were simulated on
            train_config (outbreakpred.models.TrainConfig): optimizer settings

        Returns:
            Classifier: self
        """
        return self

    def predict_proba_batch(self, observed_list):
        raise NotImplementedError()

    def predict_proba(self, observed):
        """
        Outbreak probability of one observation

        Args:
            observed (outbreakpred.dataset.ObservedSequence): observation

        Returns:
            float: probability in [0, 1]
        """
        return float(self.predict_proba_batch([observed])[0])

    def config_dict(self):
        return {}

    def parameters(self):
        return {}

    def save(self, filepath, provenance=None):
        """
        Writes the classifier as a FITS checkpoint

        Args:
            filepath (str): output path
            provenance (dict): provenance block
        """
        nn.save_checkpoint(filepath, self.kind, self.config_dict(), self.parameters(), provenance)


######################## surveillance threshold ########################

class StClassifier(Classifier):
    """
    Surveillance threshold: outbreak predicted once the cumulative count at t_o reaches the threshold

    Args:
        threshold (int): case count (>= 1)
    """
    kind = "st"

    def __init__(self, threshold):
        check.positive_scalar_integer(threshold, "threshold", ModelException)
        self.threshold = threshold

    def predict_proba_batch(self, observed_list):
        counts = np.array([_observed(obs).final_count for obs in observed_list])
        return (counts >= self.threshold).astype(np.float64)

    def config_dict(self):
        return {"threshold": self.threshold}


def st_predict(threshold, observed):
    """
    Hard ST score

    Args:
        threshold (int): case count
        observed (outbreakpred.dataset.ObservedSequence): observation

    Returns:
        float: 1.0 if the cumulative count at t_o >= threshold else 0.0
    """
    return StClassifier(threshold).predict_proba(observed)


######################## k nearest neighbors ########################

class KnnClassifier(Classifier):
    """
    Brute-force KNN over cumulative-count vectors. The score is the fraction of
    positives among the k nearest training samples (Euclidean distance, ties
    broken by lower sample id).

    Args:
        k (int): neighbor count
    """
    kind = "knn"

    def __init__(self, k=5):
        check.positive_scalar_integer(k, "k", ModelException)
        self.k = k
        self.train_features = None
        self.train_labels = None
        self.train_ids = None

    @property
    def length(self):
        return self.train_features.shape[1]

    def features(self, observed):
        """
        cum_counts zero-padded or truncated to the training horizon
        """
        counts = _observed(observed).cum_counts.astype(np.float64)
        out = np.zeros(self.length)
        n = min(self.length, counts.size)
        out[:n] = counts[:n]
        return out

    def fit(self, train, val=None, graph=None, train_config=None):
        if len(train) == 0:
            raise ModelException("KNN needs at least one training sample")
        if self.k > len(train):
            raise ModelException("k={0} exceeds the {1} training samples".format(self.k, len(train)))
        self.train_features = np.array([_observed(s).cum_counts for s in train], dtype=np.float64)
        self.train_labels = _labels(train)
        self.train_ids = np.array([s.id for s in train], dtype=np.int64)
        return self

    def neighbors(self, observed):
        """
        Indices (into the training set) of the k nearest samples, nearest first

        Args:
            observed (outbreakpred.dataset.ObservedSequence): query

        Returns:
            np.array: k training indices
        """
        if self.train_features is None:
            raise ModelException("KNN has not been fit")
        dist = np.linalg.norm(self.train_features - self.features(observed), axis=1)
        return np.lexsort((self.train_ids, dist))[:self.k]

    def predict_proba_batch(self, observed_list):
        return np.array([self.train_labels[self.neighbors(obs)].mean() for obs in observed_list])

    def config_dict(self):
        return {"k": self.k}

    def parameters(self):
        return {"train_features": self.train_features, "train_labels": self.train_labels,
                "train_ids": self.train_ids.astype(np.float64)}


######################## shared neural training ########################

@dataclass(frozen=True)
class TrainConfig:
    """
    Minibatch Adam training with early stopping on validation AUC

    Args:
        learning_rate (float): Adam step size
        batch_size (int): minibatch size
        max_epochs (int): epoch cap (0 leaves the model untouched)
        patience (int): epochs without validation improvement before stopping, 0 disables
        seed (int): seed of the minibatch shuffle
    """
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        check.real_positive_scalar(self.learning_rate, "learning_rate", ModelException)
        check.positive_scalar_integer(self.batch_size, "batch_size", ModelException)
        check.nonnegative_scalar_integer(self.max_epochs, "max_epochs", ModelException)
        check.nonnegative_scalar_integer(self.patience, "patience", ModelException)
        check.nonnegative_scalar_integer(self.seed, "seed", ModelException)

    @classmethod
    def default(cls, **kwargs):
        """
        TrainConfig with unset fields taken from the package configuration
        """
        kwargs.setdefault("learning_rate", outbreakpred.learning_rate)
        kwargs.setdefault("batch_size", outbreakpred.batch_size)
        kwargs.setdefault("max_epochs", outbreakpred.max_epochs)
        kwargs.setdefault("patience", outbreakpred.patience)
        return cls(**kwargs)


def _seeded(seed, stream):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream,))))


class NeuralClassifier(Classifier):
    """
    Base class of the gradient-trained predictors. Subclasses provide encode(),
    forward() and backward(); this class owns the training loop and checkpoints.

    Args:
        seed (int): seed of the parameter initialization
    """
    def __init__(self, seed=0):
        check.nonnegative_scalar_integer(seed, "seed", ModelException)
        self.seed = seed
        self.history = []

    def encode(self, observed_list):
        raise NotImplementedError()

    def forward(self, X):
        raise NotImplementedError()

    def backward(self, cache, dlogits):
        raise NotImplementedError()

    def zero_head(self):
        """Zeroes the output layer so the model emits 0.5 for every input"""
        self.mlp.zero_output()

    def loss_and_grads(self, X, y):
        """
        Mean BCE of a minibatch and its gradient w.r.t. every parameter

        Args:
            X (np.array): encoded inputs
            y (np.array): labels

        Returns:
            tuple:
                loss (float): mean BCE
                grads (dict): name -> gradient
        """
        logits, cache = self.forward(X)
        loss, dlogits = nn.bce_with_logits(y, logits)
        return loss, self.backward(cache, dlogits)

    def predict_logits(self, X):
        return self.forward(X)[0]

    def predict_proba_batch(self, observed_list):
        if len(observed_list) == 0:
            return np.zeros(0)
        X = self.encode([_observed(obs) for obs in observed_list])
        return nn.sigmoid(self.predict_logits(X))

    def _score(self, X_val, y_val, use_auc):
        if y_val.size == 0:
            return 0.0
        p = nn.sigmoid(self.predict_logits(X_val))
        if use_auc:
            return float(evaluation.auc(y_val, p))
        return -nn.bce_loss(y_val, p)

    def fit_arrays(self, X_train, y_train, X_val, y_val, train_config, evaluate_initial=False, trainable=None):
        """
        Trains on encoded arrays. After every epoch the validation AUC is
        computed; the best parameters seen are restored at the end. With
        evaluate_initial the untrained state competes too.

        Args:
            X_train, y_train (np.array): encoded training inputs and labels
            X_val, y_val (np.array): encoded validation inputs and labels
            train_config (outbreakpred.models.TrainConfig): optimizer settings
            evaluate_initial (bool): score the starting parameters before training
            trainable (tuple): parameter name prefixes to update, None for all

        Returns:
            list: per-epoch history dicts (epoch, train_loss, val_score)
        """
        n = len(y_train)
        if n == 0:
            raise ModelException("cannot train on an empty training split")
        params = self.parameters()
        names = [name for name in params if trainable is None or any(name.startswith(p) for p in trainable)]
        if len(names) == 0:
            raise ModelException("no parameters match the trainable prefixes {0}".format(trainable))
        # validation AUC needs both classes; otherwise fall back to validation loss
        use_auc = y_val.size > 0 and 0 < y_val.sum() < y_val.size

        adam = nn.AdamState(lr=train_config.learning_rate)
        rng = _seeded(train_config.seed, 1)
        best_score = -np.inf
        best_params = None
        if evaluate_initial:
            best_score = self._score(X_val, y_val, use_auc)
            best_params = copy.deepcopy(params)
        since_best = 0
        history = []
        for epoch in range(train_config.max_epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, train_config.batch_size):
                idx = order[start:start + train_config.batch_size]
                loss, grads = self.loss_and_grads(X_train[idx], y_train[idx])
                if not np.isfinite(loss):
                    raise TrainingDivergence("non-finite training loss in epoch {0}".format(epoch + 1))
                try:
                    nn.assert_finite(grads, "gradients")
                except nn.NonFiniteError as err:
                    raise TrainingDivergence("epoch {0}: {1}".format(epoch + 1, err))
                nn.adam_step(adam, params, {name: grads[name] for name in names})
                total += loss * idx.size
            score = self._score(X_val, y_val, use_auc)
            history.append({"epoch": epoch + 1, "train_loss": total / n, "val_score": score})
            outbreakpred.log("{0} epoch {1}/{2} train_loss={3:.5f} val_{4}={5:.5f}".format(
                self.kind, epoch + 1, train_config.max_epochs, total / n, "auc" if use_auc else "negloss", score))
            if score > best_score:
                best_score = score
                best_params = copy.deepcopy(params)
                since_best = 0
            else:
                since_best += 1
                if train_config.patience and since_best >= train_config.patience:
                    break
        if best_params is not None:
            nn.assign_parameters(params, best_params, "best-epoch")
        self.history = history
        return history

    def fit(self, train, val, graph=None, train_config=None):
        if train_config is None:
            train_config = TrainConfig.default(seed=self.seed)
        X_train = self.encode([s.observed for s in train])
        X_val = self.encode([s.observed for s in val]) if len(val) else X_train[:0]
        self.fit_arrays(X_train, _labels(train), X_val, _labels(val), train_config)
        return self


######################## Outbreak-CNN ########################

def bucketize(counts, vocab_size=32):
    """
    Log-banded token of every new-infection count:
    min(c, 1 + floor(log2(c + 1))), capped at vocab_size - 1

    Args:
        counts (array_like): non-negative counts
        vocab_size (int): vocabulary size

    Returns:
        np.array: token ids
    """
    counts = np.asarray(counts, dtype=np.int64)
    if np.any(counts < 0):
        raise ModelException("counts must be non-negative")
    banded = 1 + np.floor(np.log2(counts + 1)).astype(np.int64)
    return np.minimum(np.minimum(counts, banded), vocab_size - 1)


@dataclass(frozen=True)
class OcnnConfig:
    """
    Args:
        vocab_size (int): count-bucket vocabulary
        embed_dim (int): token embedding width
        windows (tuple): convolution window sizes
        n_filters (int): filters per window
        mlp_hidden (tuple): hidden widths of the head
    """
    vocab_size: int = 32
    embed_dim: int = 32
    windows: tuple = (2, 3, 4)
    n_filters: int = 64
    mlp_hidden: tuple = (64,)

    def to_dict(self):
        return {"vocab_size": self.vocab_size, "embed_dim": self.embed_dim, "windows": list(self.windows),
                "n_filters": self.n_filters, "mlp_hidden": list(self.mlp_hidden)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["vocab_size"], d["embed_dim"], tuple(d["windows"]), d["n_filters"], tuple(d["mlp_hidden"]))


class OcnnModel(NeuralClassifier):
    """
    Outbreak-CNN: bucketized new-infection counts -> embedding -> multi-window
    convolution with max-over-time pooling -> MLP -> sigmoid

    Args:
        config (outbreakpred.models.OcnnConfig): architecture
        seed (int): initialization seed
    """
    kind = "ocnn"

    def __init__(self, config=None, seed=0):
        super().__init__(seed)
        self.config = config if config is not None else OcnnConfig()
        rng = _seeded(seed, 0)
        c = self.config
        self.conv = nn.Conv1dSpec.init(c.vocab_size, c.embed_dim, c.windows, c.n_filters, rng)
        self.mlp = nn.MlpParams.init([self.conv.output_dim] + list(c.mlp_hidden) + [1], rng)

    def encode(self, observed_list):
        tokens = [bucketize(obs.new_counts, self.config.vocab_size) for obs in observed_list]
        if len(set(t.size for t in tokens)) > 1:
            raise ModelException("all observations in a batch must share t_o")
        return np.stack(tokens)

    def forward(self, X):
        feats, conv_cache = nn.conv_forward(self.conv, X)
        logits, mlp_cache = nn.mlp_forward(self.mlp, feats)
        return logits, (conv_cache, mlp_cache)

    def backward(self, cache, dlogits):
        conv_cache, mlp_cache = cache
        mlp_grads, dfeats = nn.mlp_backward(self.mlp, mlp_cache, dlogits)
        conv_grads = nn.conv_backward(self.conv, conv_cache, dfeats)
        grads = {"conv." + name: g for name, g in conv_grads.items()}
        grads.update({"mlp." + name: g for name, g in mlp_grads.items()})
        return grads

    def parameters(self):
        params = self.conv.as_dict("conv.")
        params.update(self.mlp.as_dict("mlp."))
        return params

    def config_dict(self):
        return {"architecture": self.config.to_dict(), "seed": self.seed}


######################## Outbreak-GWN ########################

def ogwn_features(embeddings, observed):
    """
    Per-step OGWN input: log1p(new infections) followed by the mean GraphWave
    embedding of the nodes infected in that step (zeros when there are none)

    Args:
        embeddings (np.array): N x 2d node embeddings
        observed (outbreakpred.dataset.ObservedSequence): observation

    Returns:
        np.array: (t_o + 1, 1 + 2d) feature sequence
    """
    n_nodes, width = embeddings.shape
    feats = np.zeros((observed.t_o + 1, 1 + width))
    feats[:, 0] = np.log1p(observed.new_counts)
    for t, nodes in enumerate(observed.infected_nodes):
        if nodes.size == 0:
            continue
        if np.any(nodes < 0) or np.any(nodes >= n_nodes):
            raise ModelException("node id outside the embedded graph at step {0}".format(t))
        feats[t, 1:] = embeddings[nodes].mean(axis=0)
    return feats


@dataclass(frozen=True)
class OgwnConfig:
    """
    Args:
        wavelet (outbreakpred.graphwave.WaveletConfig): embedding settings
        hidden_dim (int): GRU width per direction
        mlp_hidden (tuple): hidden widths of the head
    """
    wavelet: graphwave.WaveletConfig = field(default_factory=graphwave.WaveletConfig)
    hidden_dim: int = 64
    mlp_hidden: tuple = (64,)

    @property
    def feature_dim(self):
        return 1 + self.wavelet.embedding_dim

    def to_dict(self):
        return {"wavelet": self.wavelet.to_dict(), "hidden_dim": self.hidden_dim, "mlp_hidden": list(self.mlp_hidden)}

    @classmethod
    def from_dict(cls, d):
        return cls(graphwave.WaveletConfig.from_dict(d["wavelet"]), d["hidden_dim"], tuple(d["mlp_hidden"]))


class OgwnModel(NeuralClassifier):
    """
    Outbreak-GWN: per-step count + GraphWave features -> BiGRU -> MLP -> sigmoid.
    A graph must be attached (which computes its embeddings) before encoding samples.

    Args:
        config (outbreakpred.models.OgwnConfig): architecture
        seed (int): initialization seed
    """
    kind = "ogwn"

    def __init__(self, config=None, seed=0):
        super().__init__(seed)
        self.config = config if config is not None else OgwnConfig()
        rng = _seeded(seed, 0)
        H = self.config.hidden_dim
        D = self.config.feature_dim
        self.gru_fwd = nn.GruCellParams.init(H, D, rng)
        self.gru_bwd = nn.GruCellParams.init(H, D, rng)
        self.mlp = nn.MlpParams.init([2 * H] + list(self.config.mlp_hidden) + [1], rng)
        self.embeddings = None
        self.graph_hash = None
        self.provenance = {}

    def attach_graph(self, graph, embeddings=None):
        """
        Sets the network whose samples will be encoded

        Args:
            graph (outbreakpred.netgen.Graph): network
            embeddings (np.array): precomputed embeddings, computed when None
        """
        if embeddings is None:
            embeddings = graphwave.embed_nodes(graph, self.config.wavelet)
        if embeddings.shape != (graph.n, self.config.wavelet.embedding_dim):
            raise ModelException("embeddings of shape {0} do not fit the graph and wavelet config".format(
                embeddings.shape))
        self.embeddings = embeddings
        self.graph_hash = graph.hash()
        return self

    def encode(self, observed_list):
        if self.embeddings is None:
            raise ModelException("attach a graph before encoding OGWN inputs")
        seqs = [ogwn_features(self.embeddings, obs) for obs in observed_list]
        if len(set(s.shape[0] for s in seqs)) > 1:
            raise ModelException("all observations in a batch must share t_o")
        return np.stack(seqs)

    def forward(self, X):
        if X.shape[1] == 0:
            raise ModelException("OGWN needs a non-empty sequence")
        h_fwd, cache_fwd = nn.gru_forward(self.gru_fwd, X)
        h_bwd, cache_bwd = nn.gru_forward(self.gru_bwd, X, reverse=True)
        rep = np.concatenate([h_fwd, h_bwd], axis=1)
        logits, mlp_cache = nn.mlp_forward(self.mlp, rep)
        return logits, (cache_fwd, cache_bwd, mlp_cache)

    def backward(self, cache, dlogits):
        cache_fwd, cache_bwd, mlp_cache = cache
        H = self.config.hidden_dim
        mlp_grads, drep = nn.mlp_backward(self.mlp, mlp_cache, dlogits)
        fwd_grads, _ = nn.gru_backward(self.gru_fwd, cache_fwd, drep[:, :H])
        bwd_grads, _ = nn.gru_backward(self.gru_bwd, cache_bwd, drep[:, H:], reverse=True)
        grads = {"gru_fwd." + name: g for name, g in fwd_grads.items()}
        grads.update({"gru_bwd." + name: g for name, g in bwd_grads.items()})
        grads.update({"mlp." + name: g for name, g in mlp_grads.items()})
        return grads

    def parameters(self):
        params = self.gru_fwd.as_dict("gru_fwd.")
        params.update(self.gru_bwd.as_dict("gru_bwd."))
        params.update(self.mlp.as_dict("mlp."))
        return params

    def fit(self, train, val, graph=None, train_config=None):
        if graph is not None:
            self.attach_graph(graph)
        return super().fit(train, val, graph, train_config)

    def config_dict(self):
        return {"architecture": self.config.to_dict(), "seed": self.seed}

    def save(self, filepath, provenance=None):
        if provenance is None:
            provenance = self.provenance
        super().save(filepath, provenance)


######################## checkpoints ########################

def load_model(filepath):
    """
    Rebuilds a classifier from a checkpoint

    Args:
        filepath (str): checkpoint path

    Returns:
        tuple:
            model (Classifier): the classifier
            provenance (dict): provenance block stored with it
    """
    kind, config, params, provenance = nn.load_checkpoint(filepath)
    if kind == "st":
        return StClassifier(config["threshold"]), provenance
    if kind == "knn":
        model = KnnClassifier(config["k"])
        model.train_features = params["train_features"]
        model.train_labels = params["train_labels"]
        model.train_ids = params["train_ids"].astype(np.int64)
        return model, provenance
    if kind == "ocnn":
        model = OcnnModel(OcnnConfig.from_dict(config["architecture"]), config["seed"])
    elif kind == "ogwn":
        model = OgwnModel(OgwnConfig.from_dict(config["architecture"]), config["seed"])
        model.provenance = provenance
    else:
        raise nn.CheckpointError("unknown model kind {0} in {1}".format(kind, filepath))
    nn.assign_parameters(model.parameters(), params)
    return model, provenance


######################## pretrain / finetune ########################

@dataclass(frozen=True)
class PretrainConfig:
    """
    Multi-scenario pretraining grid

    Args:
        networks (tuple): NetworkSpec of every reference network
        betas (tuple): transmission probabilities, spanning sub- and super-critical
        mu (float): recovery probability
        runs_per_cell (int): simulated runs per (network, beta) cell
        t_o (int): observation step of the pretraining samples
        epochs (int): pretraining epochs
        master_seed (int): simulation seed
        split_ratios (tuple): (train, validation, test) fractions
        ogwn (outbreakpred.models.OgwnConfig): architecture
        learning_rate (float): Adam step size
        batch_size (int): minibatch size
        patience (int): early stopping patience, 0 disables
    """
    networks: tuple
    betas: tuple
    mu: float = 0.1
    runs_per_cell: int = 2000
    t_o: int = 10
    epochs: int = 100
    master_seed: int = 0
    split_ratios: tuple = (0.8, 0.1, 0.1)
    ogwn: OgwnConfig = field(default_factory=OgwnConfig)
    learning_rate: float = 1e-3
    batch_size: int = 64
    patience: int = 10

    def __post_init__(self):
        if len(self.networks) == 0 or len(self.betas) == 0:
            raise ModelException("the pretraining grid needs at least one network and one beta")
        check.positive_scalar_integer(self.runs_per_cell, "runs_per_cell", ModelException)
        check.nonnegative_scalar_integer(self.t_o, "t_o", ModelException)
        check.nonnegative_scalar_integer(self.epochs, "epochs", ModelException)

    def train_config(self, nn_seed):
        return TrainConfig(self.learning_rate, self.batch_size, self.epochs, self.patience, nn_seed)


def pretrain_on_cells(cells, ogwn_config, train_config, provenance=None):
    """
    Trains one OGWN on the pooled samples of several (graph, dataset) cells.
    Every cell is encoded with its own graph's embeddings.

    Args:
        cells (list): (graph, dataset) pairs; all datasets share t_o
        ogwn_config (outbreakpred.models.OgwnConfig): architecture
        train_config (outbreakpred.models.TrainConfig): optimizer settings
        provenance (dict): extra provenance entries

    Returns:
        outbreakpred.models.OgwnModel: the pretrained model
    """
    if len(cells) == 0:
        raise ModelException("no pretraining cells")
    model = OgwnModel(ogwn_config, train_config.seed)
    parts = {name: ([], []) for name in ("train", "validation")}
    hashes = []
    for graph, ds in cells:
        model.attach_graph(graph)
        hashes.append(model.graph_hash)
        for name, (xs, ys) in parts.items():
            samples = ds.split(name)
            if samples:
                xs.append(model.encode([s.observed for s in samples]))
                ys.append(_labels(samples))
    X_train = np.concatenate(parts["train"][0])
    y_train = np.concatenate(parts["train"][1])
    if parts["validation"][0]:
        X_val = np.concatenate(parts["validation"][0])
        y_val = np.concatenate(parts["validation"][1])
    else:
        X_val, y_val = X_train[:0], y_train[:0]
    model.fit_arrays(X_train, y_train, X_val, y_val, train_config)

    model.embeddings = None
    model.graph_hash = None
    model.provenance = {"kind": "pretrain", "graph_hashes": sorted(set(hashes)),
                        "pooled_train_balance": float(y_train.mean())}
    if provenance:
        model.provenance.update(provenance)
    return model


def pretrain(config, nn_seed):
    """
    Simulates every (network, beta) cell of the grid, labels it with its own
    automatic phi_star and pretrains one OGWN on the pooled data. Cells without
    a separate take-off branch are skipped with a warning.

    Args:
        config (outbreakpred.models.PretrainConfig): grid and training settings
        nn_seed (int): initialization and shuffle seed

    Returns:
        outbreakpred.models.OgwnModel: pretrained model with provenance
    """
    cells = []
    cell_info = []
    skipped = []
    for net_index, spec in enumerate(config.networks):
        graph = netgen.build_network(spec)
        for beta_index, beta in enumerate(config.betas):
            params = sim.SirParams(beta, config.mu)
            sim_config = sim.SimConfig.default(master_seed=config.master_seed + 1000 * net_index + beta_index)
            batch = sim.run_batch(graph, params, sim_config, config.runs_per_cell, network=spec.to_dict())
            try:
                ds = dataset.build_dataset(batch, config.t_o, dataset.LabelingConfig(auto_phi=True),
                                           config.split_ratios, split_seed=config.master_seed)
            except (dataset.UnimodalError, dataset.DatasetException) as err:
                warnings.warn("skipping pretraining cell {0} beta={1}: {2}".format(spec.kind, beta, err))
                skipped.append({"network": spec.to_dict(), "beta": beta})
                continue
            cells.append((graph, ds))
            cell_info.append({"network": spec.to_dict(), "beta": beta, "phi_star": ds.provenance["phi_star"],
                              "n_samples": len(ds), "balance": ds.class_balance("train")})
            outbreakpred.log("pretraining cell {0} beta={1}: {2} samples".format(spec.kind, beta, len(ds)))
    if len(cells) == 0:
        raise ModelException("every pretraining cell was skipped; nothing to pretrain on")
    provenance = {"betas": list(config.betas), "mu": config.mu, "t_o": config.t_o,
                  "master_seed": config.master_seed, "nn_seed": nn_seed, "cells": cell_info, "skipped": skipped}
    return pretrain_on_cells(cells, config.ogwn, config.train_config(nn_seed), provenance)


@dataclass(frozen=True)
class FinetuneConfig:
    """
    Args:
        epochs (int): finetuning epochs (>= 0)
        lr_multiplier (float): finetune learning rate relative to base_learning_rate
        base_learning_rate (float): pretraining learning rate
        trainable (tuple): parameter prefixes to update, None for all
        batch_size (int): minibatch size
        patience (int): early stopping patience, 0 disables
        seed (int): shuffle seed
    """
    epochs: int = 10
    lr_multiplier: float = 0.1
    base_learning_rate: float = 1e-3
    trainable: tuple = None
    batch_size: int = 64
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        check.nonnegative_scalar_integer(self.epochs, "epochs", ModelException)
        check.real_positive_scalar(self.lr_multiplier, "lr_multiplier", ModelException)


def finetune(pretrained, target_graph, target_dataset, config=None):
    """
    Continues training a pretrained OGWN on a target network's training split at
    a reduced learning rate. The target network must not be among the
    pretraining networks. Model selection is by validation AUC and includes the
    pretrained starting point.

    Args:
        pretrained (outbreakpred.models.OgwnModel): pretrained model (left untouched)
        target_graph (outbreakpred.netgen.Graph): target network
        target_dataset (outbreakpred.dataset.Dataset or tuple): dataset, or (train, validation) sample lists
        config (outbreakpred.models.FinetuneConfig): finetuning settings

    Returns:
        outbreakpred.models.OgwnModel: finetuned copy
    """
    if config is None:
        config = FinetuneConfig()
    if not isinstance(pretrained, OgwnModel):
        raise nn.CheckpointError("finetuning needs a pretrained OGWN, got {0}".format(type(pretrained).__name__))
    target_hash = target_graph.hash()
    pretrained_hashes = pretrained.provenance.get("graph_hashes", [])
    if target_hash in pretrained_hashes:
        raise ProvenanceError("target network {0} was used for pretraining".format(target_hash[:12]))
    if isinstance(target_dataset, dataset.Dataset):
        if target_dataset.graph_hash and target_dataset.graph_hash != target_hash:
            raise ModelException("target dataset was not simulated on the target network")
        train, val = target_dataset.split("train"), target_dataset.split("validation")
    else:
        train, val = target_dataset

    model = copy.deepcopy(pretrained)
    model.attach_graph(target_graph)
    model.provenance = dict(pretrained.provenance)
    model.provenance.update({"kind": "finetune", "finetune_graph_hash": target_hash,
                             "finetune_epochs": config.epochs, "finetune_train_size": len(train)})
    if config.epochs == 0:
        return model
    train_config = TrainConfig(config.base_learning_rate * config.lr_multiplier, config.batch_size,
                               config.epochs, config.patience, config.seed)
    X_train = model.encode([s.observed for s in train])
    X_val = model.encode([s.observed for s in val]) if len(val) else X_train[:0]
    model.fit_arrays(X_train, _labels(train), X_val, _labels(val), train_config,
                     evaluate_initial=True, trainable=config.trainable)
    return model


class PretrainFinetuneClassifier(Classifier):
    """
    Classifier-contract wrapper: fit() finetunes a pretrained OGWN on the given data

    Args:
        pretrained (outbreakpred.models.OgwnModel): pretrained model
        config (outbreakpred.models.FinetuneConfig): finetuning settings
    """
    kind = "pretrain-finetune"

    def __init__(self, pretrained, config=None):
        self.pretrained = pretrained
        self.config = config if config is not None else FinetuneConfig()
        self.model = None

    def fit(self, train, val, graph=None, train_config=None):
        if graph is None:
            raise ModelException("pretrain-finetune needs the target graph")
        self.model = finetune(self.pretrained, graph, (train, val), self.config)
        return self

    def predict_proba_batch(self, observed_list):
        if self.model is None:
            raise ModelException("pretrain-finetune has not been fit")
        return self.model.predict_proba_batch(observed_list)

    def save(self, filepath, provenance=None):
        self.model.save(filepath, provenance)


def build_classifier(name, seed=0, k=5, pretrained=None, finetune_config=None, ocnn_config=None, ogwn_config=None):
    """
    Classifier for a CLI model name

    Args:
        name (str): one of st5, st15, st25, knn, ocnn, ogwn, pretrain-finetune
        seed (int): initialization seed of neural models
        k (int): KNN neighbor count
        pretrained (outbreakpred.models.OgwnModel): required for pretrain-finetune
        finetune_config (outbreakpred.models.FinetuneConfig): finetuning settings
        ocnn_config (outbreakpred.models.OcnnConfig): OCNN architecture
        ogwn_config (outbreakpred.models.OgwnConfig): OGWN architecture

    Returns:
        Classifier: the untrained classifier
    """
    if name in ("st5", "st15", "st25"):
        return StClassifier(int(name[2:]))
    if name == "knn":
        return KnnClassifier(k)
    if name == "ocnn":
        return OcnnModel(ocnn_config, seed)
    if name == "ogwn":
        return OgwnModel(ogwn_config, seed)
    if name == "pretrain-finetune":
        if pretrained is None:
            raise ModelException("pretrain-finetune needs a pretrained checkpoint")
        return PretrainFinetuneClassifier(pretrained, finetune_config)
    raise ModelException("unknown model {0}; expected one of {1}".format(name, ", ".join(model_names)))
