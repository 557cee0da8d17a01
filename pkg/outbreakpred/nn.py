"""
Small dense neural kernel in double precision: GRU / bidirectional GRU,
1D convolution with max-over-time pooling, MLP head, binary cross-entropy,
hand-written backward passes, the Adam optimizer and a FITS checkpoint container.

All layers work on batches. Sequences are (B, T, D) arrays, token sequences (B, T).
"""
import json
from dataclasses import dataclass

import numpy as np
import scipy.special
import astropy.io.fits as fits

import outbreakpred


class NNException(Exception):
    """Exception class for the nn module."""


class ShapeError(NNException):
    """Raised on incompatible array shapes."""


class NonFiniteError(NNException):
    """Raised when a NaN or Inf shows up in activations or gradients."""


class CheckpointError(NNException):
    """Raised when a checkpoint cannot be read back into a model."""


bce_eps = 1e-12

sigmoid = scipy.special.expit


def assert_finite(arrays, what):
    """
    Raises NonFiniteError if any array holds NaN or Inf

    Args:
        arrays (dict or list): arrays to inspect
        what (str): description used in the message
    """
    items = arrays.items() if isinstance(arrays, dict) else enumerate(arrays)
    for name, arr in items:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("non-finite values in {0} ({1})".format(what, name))


def glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


######################## GRU ########################

class GruCellParams():
    """
    Weights of one GRU cell. Every W acts on the concatenation [h_prev, x].

    Args:
        W_i, W_r, W_c (np.array): (H, H+D) update-gate, reset-gate and candidate weights
        b_i, b_r, b_c (np.array): (H,) biases

    Attributes:
        hidden_dim (int): H
        input_dim (int): D
    """
    names = ("W_i", "W_r", "W_c", "b_i", "b_r", "b_c")

    def __init__(self, W_i, W_r, W_c, b_i, b_r, b_c):
        self.W_i = np.asarray(W_i, dtype=np.float64)
        self.W_r = np.asarray(W_r, dtype=np.float64)
        self.W_c = np.asarray(W_c, dtype=np.float64)
        self.b_i = np.asarray(b_i, dtype=np.float64)
        self.b_r = np.asarray(b_r, dtype=np.float64)
        self.b_c = np.asarray(b_c, dtype=np.float64)
        self.hidden_dim = self.b_i.shape[0]
        self.input_dim = self.W_i.shape[1] - self.hidden_dim
        for name in ("W_i", "W_r", "W_c"):
            if getattr(self, name).shape != (self.hidden_dim, self.hidden_dim + self.input_dim):
                raise ShapeError("{0} must have shape (H, H+D)".format(name))
        for name in ("b_r", "b_c"):
            if getattr(self, name).shape != (self.hidden_dim,):
                raise ShapeError("{0} must have shape (H,)".format(name))

    @classmethod
    def init(cls, hidden_dim, input_dim, rng):
        """
        Glorot-uniform weights and zero biases

        Args:
            hidden_dim (int): H
            input_dim (int): D
            rng (np.random.Generator): random source

        Returns:
            outbreakpred.nn.GruCellParams: the parameters
        """
        shape = (hidden_dim, hidden_dim + input_dim)
        weights = [glorot(rng, shape, hidden_dim + input_dim, hidden_dim) for _ in range(3)]
        biases = [np.zeros(hidden_dim) for _ in range(3)]
        return cls(*weights, *biases)

    @classmethod
    def zeros(cls, hidden_dim, input_dim):
        shape = (hidden_dim, hidden_dim + input_dim)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape),
                   np.zeros(hidden_dim), np.zeros(hidden_dim), np.zeros(hidden_dim))

    def as_dict(self, prefix):
        return {prefix + name: getattr(self, name) for name in self.names}


def _gru_step_cached(params, h_prev, x_t):
    if h_prev.shape[-1] != params.hidden_dim or x_t.shape[-1] != params.input_dim:
        raise ShapeError("gru_step expects h_prev (.., {0}) and x_t (.., {1}), got {2} and {3}".format(
            params.hidden_dim, params.input_dim, h_prev.shape, x_t.shape))
    hx = np.concatenate([h_prev, x_t], axis=-1)
    z = sigmoid(hx @ params.W_i.T + params.b_i)
    r = sigmoid(hx @ params.W_r.T + params.b_r)
    rhx = np.concatenate([r * h_prev, x_t], axis=-1)
    c = np.tanh(rhx @ params.W_c.T + params.b_c)
    h = (1.0 - z) * h_prev + z * c
    return h, (h_prev, hx, rhx, z, r, c)


def gru_step(params, h_prev, x_t):
    """
    One GRU update:
    z = sigmoid(W_i [h_prev, x] + b_i), r = sigmoid(W_r [h_prev, x] + b_r),
    c = tanh(W_c [r * h_prev, x] + b_c), h = (1 - z) * h_prev + z * c

    Args:
        params (outbreakpred.nn.GruCellParams): cell weights
        h_prev (np.array): (H,) or (B, H) previous state
        x_t (np.array): (D,) or (B, D) input

    Returns:
        np.array: new state, same shape as h_prev
    """
    h_prev = np.asarray(h_prev, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    return _gru_step_cached(params, h_prev, x_t)[0]


def _gru_step_backward(params, cache, dh, grads):
    h_prev, hx, rhx, z, r, c = cache
    H = params.hidden_dim
    dz = dh * (c - h_prev)
    dc = dh * z
    dh_prev = dh * (1.0 - z)

    dc_pre = dc * (1.0 - c ** 2)
    grads["W_c"] += dc_pre.T @ rhx
    grads["b_c"] += dc_pre.sum(axis=0)
    drhx = dc_pre @ params.W_c
    drh = drhx[:, :H]
    dx = drhx[:, H:].copy()
    dh_prev += drh * r
    dr = drh * h_prev

    dr_pre = dr * r * (1.0 - r)
    grads["W_r"] += dr_pre.T @ hx
    grads["b_r"] += dr_pre.sum(axis=0)
    dhx = dr_pre @ params.W_r

    dz_pre = dz * z * (1.0 - z)
    grads["W_i"] += dz_pre.T @ hx
    grads["b_i"] += dz_pre.sum(axis=0)
    dhx += dz_pre @ params.W_i

    dh_prev += dhx[:, :H]
    dx += dhx[:, H:]
    return dh_prev, dx


def gru_forward(params, X, reverse=False):
    """
    Runs a GRU over a batch of sequences from a zero state

    Args:
        params (outbreakpred.nn.GruCellParams): cell weights
        X (np.array): (B, T, D) inputs
        reverse (bool): read the sequence from T down to 1

    Returns:
        tuple:
            h (np.array): (B, H) final state
            caches (list): per-step caches for gru_backward
    """
    B, T, _ = X.shape
    h = np.zeros((B, params.hidden_dim))
    caches = []
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        h, cache = _gru_step_cached(params, h, X[:, t, :])
        caches.append(cache)
    return h, caches


def gru_backward(params, caches, dh, reverse=False):
    """
    Backpropagates through a gru_forward pass

    Args:
        params (outbreakpred.nn.GruCellParams): cell weights
        caches (list): caches returned by gru_forward
        dh (np.array): (B, H) gradient w.r.t. the final state
        reverse (bool): must match the forward pass

    Returns:
        tuple:
            grads (dict): gradient per parameter name
            dX (np.array): (B, T, D) gradient w.r.t. the inputs
    """
    grads = {name: np.zeros_like(getattr(params, name)) for name in GruCellParams.names}
    T = len(caches)
    B = dh.shape[0]
    dX = np.zeros((B, T, params.input_dim))
    order = list(range(T - 1, -1, -1)) if reverse else list(range(T))
    for cache, t in zip(reversed(caches), reversed(order)):
        dh, dx = _gru_step_backward(params, cache, dh, grads)
        dX[:, t, :] = dx
    return grads, dX


def bigru_forward(fwd_params, bwd_params, sequence):
    """
    Bidirectional GRU representation: final forward state (read 1..T)
    concatenated with the final backward state (read T..1)

    Args:
        fwd_params (outbreakpred.nn.GruCellParams): forward cell
        bwd_params (outbreakpred.nn.GruCellParams): backward cell
        sequence (np.array): (T, D) sequence or (B, T, D) batch

    Returns:
        np.array: (2H,) or (B, 2H) representation
    """
    X = np.asarray(sequence, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[np.newaxis]
    if X.ndim != 3:
        raise ShapeError("bigru_forward expects a (T, D) or (B, T, D) array")
    if X.shape[1] == 0:
        raise NNException("bigru_forward needs a non-empty sequence")
    out = np.concatenate([gru_forward(fwd_params, X)[0], gru_forward(bwd_params, X, reverse=True)[0]], axis=1)
    return out[0] if single else out


######################## convolution ########################

class Conv1dSpec():
    """
    Token embedding table and 1D convolution filters with max-over-time pooling

    Args:
        E (np.array): (V, k) embedding table
        filters (dict): window h -> (W (F, h, k), b (F,))

    Attributes:
        vocab_size (int): V
        embed_dim (int): k
        windows (tuple): window sizes, ascending
        n_filters (int): F, the same for every window
    """
    def __init__(self, E, filters):
        self.E = np.asarray(E, dtype=np.float64)
        self.vocab_size, self.embed_dim = self.E.shape
        self.windows = tuple(sorted(filters))
        self.W = {}
        self.b = {}
        for h in self.windows:
            W, b = filters[h]
            W = np.asarray(W, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if h < 1 or W.ndim != 3 or W.shape[1:] != (h, self.embed_dim) or b.shape != (W.shape[0],):
                raise ShapeError("filters of window {0} must be (F, {0}, {1}) with (F,) biases".format(
                    h, self.embed_dim))
            self.W[h] = W
            self.b[h] = b
        self.n_filters = self.W[self.windows[0]].shape[0]

    @classmethod
    def init(cls, vocab_size, embed_dim, windows, n_filters, rng):
        """
        Random embedding table (unit normal scaled by 1/sqrt(k)), Glorot filters, zero biases
        """
        E = rng.standard_normal((vocab_size, embed_dim)) / np.sqrt(embed_dim)
        filters = {}
        for h in windows:
            fan_in = h * embed_dim
            filters[h] = (glorot(rng, (n_filters, h, embed_dim), fan_in, n_filters), np.zeros(n_filters))
        return cls(E, filters)

    @property
    def output_dim(self):
        return self.n_filters * len(self.windows)

    def as_dict(self, prefix):
        params = {prefix + "E": self.E}
        for h in self.windows:
            params["{0}W{1}".format(prefix, h)] = self.W[h]
            params["{0}b{1}".format(prefix, h)] = self.b[h]
        return params


def conv_forward(spec, tokens):
    tokens = np.asarray(tokens)
    if tokens.dtype.kind not in "iu":
        raise NNException("token ids must be integers")
    if np.any(tokens < 0) or np.any(tokens >= spec.vocab_size):
        raise NNException("token ids must lie in [0, {0})".format(spec.vocab_size))
    M = spec.E[tokens]
    B, T, k = M.shape
    outputs = []
    caches = {}
    for h in spec.windows:
        if T < h:
            Mh = np.concatenate([M, np.zeros((B, h - T, k))], axis=1)
        else:
            Mh = M
        # (B, n_windows, k, h) -> (B, n_windows, h, k)
        windows = np.lib.stride_tricks.sliding_window_view(Mh, h, axis=1).transpose(0, 1, 3, 2)
        pre = np.einsum("bnhk,fhk->bnf", windows, spec.W[h]) + spec.b[h]
        act = np.maximum(pre, 0.0)
        best = np.argmax(act, axis=1)
        outputs.append(np.take_along_axis(act, best[:, np.newaxis, :], axis=1)[:, 0, :])
        caches[h] = (windows, pre, best)
    return np.concatenate(outputs, axis=1), (tokens, M.shape, caches)


def conv1d_maxpool(spec, token_sequence):
    """
    Embeds tokens, applies ReLU(w . window + b) for every filter over every
    window, and keeps the maximum per filter. Sequences shorter than a window
    are zero padded on the right to its length.

    Args:
        spec (outbreakpred.nn.Conv1dSpec): embedding table and filters
        token_sequence (array_like): (T,) token ids or (B, T) batch

    Returns:
        np.array: (F * n_windows,) or (B, F * n_windows) pooled features, windows in ascending order
    """
    tokens = np.asarray(token_sequence)
    single = tokens.ndim == 1
    if single:
        tokens = tokens[np.newaxis]
    out = conv_forward(spec, tokens)[0]
    return out[0] if single else out


def conv_backward(spec, cache, dout):
    tokens, (B, T, k), caches = cache
    F = spec.n_filters
    grads = {"E": np.zeros_like(spec.E)}
    dM_total = np.zeros((B, max([T] + list(spec.windows)), k))
    rows = np.arange(B)[:, np.newaxis]
    for j, h in enumerate(spec.windows):
        windows, pre, best = caches[h]
        dpooled = dout[:, j * F:(j + 1) * F]
        pre_best = np.take_along_axis(pre, best[:, np.newaxis, :], axis=1)[:, 0, :]
        dpre = np.where(pre_best > 0, dpooled, 0.0)
        # window at the argmax position for every (sample, filter): (B, F, h, k)
        chosen = windows[rows, best]
        grads["W{0}".format(h)] = np.einsum("bf,bfhk->fhk", dpre, chosen)
        grads["b{0}".format(h)] = dpre.sum(axis=0)
        dwin = dpre[:, :, np.newaxis, np.newaxis] * spec.W[h][np.newaxis]
        for offset in range(h):
            np.add.at(dM_total, (rows, best + offset), dwin[:, :, offset, :])
    np.add.at(grads["E"], tokens, dM_total[:, :T])
    return grads


######################## MLP ########################

class MlpParams():
    """
    Fully connected head: ReLU hidden layers and a single sigmoid output

    Args:
        weights (list): (out, in) matrices
        biases (list): (out,) vectors

    Attributes:
        sizes (list): layer widths, input first, final width 1
    """
    def __init__(self, weights, biases):
        self.weights = [np.asarray(W, dtype=np.float64) for W in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.sizes = [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.sizes[i + 1], self.sizes[i]) or b.shape != (self.sizes[i + 1],):
                raise ShapeError("layer {0} of the MLP has incompatible shapes".format(i))
        if self.sizes[-1] != 1:
            raise ShapeError("the final MLP layer must have width 1")

    @classmethod
    def init(cls, sizes, rng):
        weights = [glorot(rng, (sizes[i + 1], sizes[i]), sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]
        biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        return cls(weights, biases)

    def zero_output(self):
        """Zeroes the output layer so that every prediction is sigmoid(0) = 0.5"""
        self.weights[-1][...] = 0.0
        self.biases[-1][...] = 0.0

    def as_dict(self, prefix):
        params = {}
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            params["{0}W{1}".format(prefix, i)] = W
            params["{0}b{1}".format(prefix, i)] = b
        return params


def mlp_forward(params, x):
    """
    Args:
        params (outbreakpred.nn.MlpParams): weights
        x (np.array): (B, in) inputs

    Returns:
        tuple:
            logits (np.array): (B,) pre-sigmoid outputs
            cache (list): layer inputs for mlp_backward
    """
    if x.shape[-1] != params.sizes[0]:
        raise ShapeError("MLP expects {0} input features, got {1}".format(params.sizes[0], x.shape[-1]))
    cache = []
    a = x
    n_layers = len(params.weights)
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        cache.append(a)
        z = a @ W.T + b
        a = np.maximum(z, 0.0) if i < n_layers - 1 else z
    return a[:, 0], cache


def mlp_backward(params, cache, dlogits):
    grads = {}
    n_layers = len(params.weights)
    da = dlogits[:, np.newaxis]
    for i in range(n_layers - 1, -1, -1):
        a_in = cache[i]
        grads["W{0}".format(i)] = da.T @ a_in
        grads["b{0}".format(i)] = da.sum(axis=0)
        da = da @ params.weights[i]
        if i > 0:
            da = da * (a_in > 0)
    return grads, da


######################## loss ########################

def bce_loss(y_true, y_pred):
    """
    Mean binary cross-entropy with predictions clamped to [eps, 1 - eps]

    Args:
        y_true (array_like): labels in {0, 1}
        y_pred (array_like): predicted probabilities

    Returns:
        float: loss (>= 0)
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ShapeError("labels and predictions differ in length ({0} vs {1})".format(y_true.shape, y_pred.shape))
    p = np.clip(y_pred, bce_eps, 1.0 - bce_eps)
    return float(-np.mean(y_true * np.log(p) + (1.0 - y_true) * np.log(1.0 - p)))


def bce_with_logits(y_true, logits):
    """
    BCE of sigmoid(logits) and its gradient w.r.t. the logits. The gradient is
    zero wherever the clamp is active.

    Args:
        y_true (np.array): (B,) labels
        logits (np.array): (B,) pre-sigmoid outputs

    Returns:
        tuple:
            loss (float): mean BCE
            dlogits (np.array): (B,) gradient
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    p = sigmoid(logits)
    loss = bce_loss(y_true, p)
    clamped = (p < bce_eps) | (p > 1.0 - bce_eps)
    dlogits = np.where(clamped, 0.0, (p - y_true) / y_true.size)
    return loss, dlogits


######################## optimizer ########################

@dataclass
class AdamState:
    """
    Adam moments and hyperparameters

    Args:
        lr (float): learning rate
        beta1 (float): first-moment decay
        beta2 (float): second-moment decay
        eps (float): denominator offset
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = None
    v: dict = None

    def __post_init__(self):
        if self.m is None:
            self.m = {}
        if self.v is None:
            self.v = {}


def adam_step(state, params, grads):
    """
    Bias-corrected Adam update, applied in place

    Args:
        state (outbreakpred.nn.AdamState): optimizer state (updated)
        params (dict): name -> parameter array (updated in place)
        grads (dict): name -> gradient; names missing from grads are frozen

    Returns:
        dict: params
    """
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, grad in grads.items():
        param = params[name]
        if grad.shape != param.shape:
            raise ShapeError("gradient of {0} has shape {1}, parameter has {2}".format(name, grad.shape, param.shape))
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad ** 2
        param -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return params


######################## gradient checking ########################

def numerical_gradient(loss_fn, params, name, step=1e-5):
    """
    Central finite-difference gradient of loss_fn() w.r.t. params[name]

    Args:
        loss_fn (callable): no-argument function returning the scalar loss
        params (dict): name -> parameter array (perturbed in place and restored)
        name (str): parameter to differentiate
        step (float): finite-difference step

    Returns:
        np.array: gradient estimate, same shape as the parameter
    """
    param = params[name]
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = param[idx]
        param[idx] = orig + step
        plus = loss_fn()
        param[idx] = orig - step
        minus = loss_fn()
        param[idx] = orig
        grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic, numeric):
    """
    ||a - n|| / max(||a|| + ||n||, 1e-12)
    """
    denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


######################## checkpoints ########################

def save_checkpoint(filepath, model_kind, config, params, provenance=None):
    """
    Writes named parameter arrays to a FITS checkpoint. The primary header holds
    the format version, the model kind, and the config and provenance as JSON;
    every parameter goes into its own image extension (PARNAME card), in the
    order of `params`. Nothing time dependent is written.

    Args:
        filepath (str): output path
        model_kind (str): model tag
        config (dict): architecture and training settings
        params (dict): name -> array, in their canonical order
        provenance (dict): where the training data came from
    """
    prihdr = fits.Header()
    prihdr["FORMATV"] = outbreakpred.format_version
    prihdr["MODEL"] = model_kind
    prihdr["CONFIG"] = json.dumps(config, sort_keys=True)
    prihdr["PROVNCE"] = json.dumps(provenance if provenance is not None else {}, sort_keys=True)
    prihdr["NPARAMS"] = len(params)
    hdulist = fits.HDUList([fits.PrimaryHDU(header=prihdr)])
    for name, array in params.items():
        exthdr = fits.Header()
        exthdr["PARNAME"] = name
        hdulist.append(fits.ImageHDU(data=np.asarray(array, dtype=np.float64), header=exthdr))
    hdulist.writeto(filepath, overwrite=True)


def load_checkpoint(filepath):
    """
    Reads a checkpoint written by save_checkpoint

    Args:
        filepath (str): checkpoint path

    Returns:
        tuple:
            model_kind (str): model tag
            config (dict): config block
            params (dict): name -> array, in file order
            provenance (dict): provenance block
    """
    with fits.open(filepath) as hdulist:
        prihdr = hdulist[0].header
        version = prihdr.get("FORMATV")
        if version != outbreakpred.format_version:
            raise CheckpointError("{0} has checkpoint version {1}, expected {2}".format(
                filepath, version, outbreakpred.format_version))
        model_kind = prihdr["MODEL"]
        config = json.loads(prihdr["CONFIG"])
        provenance = json.loads(prihdr["PROVNCE"])
        params = {}
        for hdu in hdulist[1:]:
            data = hdu.data
            params[hdu.header["PARNAME"]] = np.array(data, dtype=np.float64) if data is not None else np.zeros(0)
        if len(params) != prihdr.get("NPARAMS", len(params)):
            raise CheckpointError("{0} is truncated".format(filepath))
    return model_kind, config, params, provenance


def assign_parameters(target, loaded, what="checkpoint"):
    """
    Copies loaded arrays into a model's parameter dict after checking that
    names and shapes agree

    Args:
        target (dict): name -> parameter array of the model (updated in place)
        loaded (dict): name -> array read from a checkpoint
        what (str): description used in error messages
    """
    if list(target) != list(loaded):
        raise CheckpointError("{0} parameters {1} do not match the model's {2}".format(
            what, list(loaded), list(target)))
    for name, array in loaded.items():
        if target[name].shape != array.shape:
            raise CheckpointError("{0} parameter {1} has shape {2}, model expects {3}".format(
                what, name, array.shape, target[name].shape))
    for name, array in loaded.items():
        target[name][...] = array
