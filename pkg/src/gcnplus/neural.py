"""Full-batch node classifiers with hand-written backward passes.

Models
------
``GCNPlus``   H = relu(X W1); Z = propagate(H); logits = Z W2
``DeepGCN``   L stacked layers relu(A_hat H W); A_hat = A~_sym gives vanilla GCN,
              a case-2 operator gives GCN*
``SGC``       logits = (A~_sym^k X) W with the propagation done once
MLP is ``GCNPlus`` with zero hops.

Parameters are plain ``dict[str, ndarray]``; every model exposes
``forward(params, X, rng=None) -> (logits, cache)`` (train mode iff an rng is
given) and ``backward(params, cache, dlogits) -> grads``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyMask, InvalidConfig, NonFiniteLoss
from .graph import CsrGraph, NormalizationKind
from .propagation import (
    Kernel,
    PropagationConfig,
    PropagationOperator,
    apply_hat,
    apply_hat_transpose,
    propagate,
    propagate_transpose,
)

log = logging.getLogger(__name__)

MODELS = ("gcnplus", "gcn", "gcn-star", "sgc", "mlp")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(seed: int, d: int, m: int, c: int, bias: bool = False) -> dict[str, np.ndarray]:
    """Glorot-uniform W1 (d x m) and W2 (m x c); zero biases when enabled."""
    if min(d, m, c) < 1:
        raise InvalidConfig(f"dimensions must be positive, got d={d}, m={m}, c={c}")
    rng = np.random.default_rng(seed)
    params = {"W1": glorot(rng, d, m), "W2": glorot(rng, m, c)}
    if bias:
        params["b1"] = np.zeros(m)
        params["b2"] = np.zeros(c)
    return params


def count_parameters(params: dict[str, np.ndarray]) -> int:
    return int(sum(p.size for p in params.values()))


def _dropout(rng, X, rate):
    if rng is None or rate <= 0.0:
        return X, None
    keep = rng.random(X.shape) >= rate
    scale = keep / (1.0 - rate)
    return X * scale, scale


def _relu(x):
    return np.maximum(x, 0.0)


class GCNPlus:
    """Transform, parameter-free propagation, linear classifier."""

    def __init__(self, op: PropagationOperator, d: int, c: int, hidden: int = 64,
                 dropout: float = 0.5, bias: bool = False):
        self.op = op
        self.d, self.c, self.hidden = d, c, hidden
        self.dropout = dropout
        self.bias = bias
        self.decay_keys = ("W1",)

    def init(self, seed: int) -> dict[str, np.ndarray]:
        return init_params(seed, self.d, self.hidden, self.c, bias=self.bias)

    def prepare(self, X):
        return X

    def forward(self, params, X, rng=None):
        if X.shape[1] != params["W1"].shape[0]:
            raise DimensionMismatch(f"X has {X.shape[1]} columns, W1 expects {params['W1'].shape[0]}")
        Xd, x_scale = _dropout(rng, X, self.dropout)
        P = Xd @ params["W1"]
        if "b1" in params:
            P = P + params["b1"]
        H = _relu(P)
        Hd, h_scale = _dropout(rng, H, self.dropout)
        Z = propagate(self.op, Hd)
        logits = Z @ params["W2"]
        if "b2" in params:
            logits = logits + params["b2"]
        return logits, {"Xd": Xd, "P": P, "h_scale": h_scale, "Z": Z}

    def backward(self, params, cache, dlogits):
        grads = {"W2": cache["Z"].T @ dlogits}
        if "b2" in params:
            grads["b2"] = dlogits.sum(axis=0)
        dZ = dlogits @ params["W2"].T
        dH = propagate_transpose(self.op, dZ)
        if cache["h_scale"] is not None:
            dH = dH * cache["h_scale"]
        dP = dH * (cache["P"] > 0)
        grads["W1"] = cache["Xd"].T @ dP
        if "b1" in params:
            grads["b1"] = dP.sum(axis=0)
        return grads

    def embed(self, params, X):
        """Post-propagation, pre-classifier node embeddings (eval mode)."""
        return self.forward(params, X)[1]["Z"]


class DeepGCN:
    """``layers`` stacked graph convolutions with ReLU between them."""

    def __init__(self, op: PropagationOperator, d: int, c: int, hidden: int = 64,
                 layers: int = 2, dropout: float = 0.5):
        if layers < 1:
            raise InvalidConfig("need at least one layer")
        self.op = op
        self.d, self.c, self.hidden, self.layers = d, c, hidden, layers
        self.dropout = dropout
        self.decay_keys = ("W0",)

    def dims(self) -> list[tuple[int, int]]:
        sizes = [self.d] + [self.hidden] * (self.layers - 1) + [self.c]
        return list(zip(sizes[:-1], sizes[1:]))

    def init(self, seed: int) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        return {f"W{i}": glorot(rng, a, b) for i, (a, b) in enumerate(self.dims())}

    def prepare(self, X):
        return X

    def forward(self, params, X, rng=None):
        H = X
        inputs, pre, scales = [], [], []
        hidden = X
        for i in range(self.layers):
            Hd, scale = _dropout(rng, H, self.dropout)
            P = apply_hat(self.op, Hd @ params[f"W{i}"])
            inputs.append(Hd)
            scales.append(scale)
            pre.append(P)
            if i < self.layers - 1:
                H = _relu(P)
                hidden = H
        return P, {"inputs": inputs, "pre": pre, "scales": scales, "hidden": hidden}

    def backward(self, params, cache, dlogits):
        grads = {}
        dP = dlogits
        for i in reversed(range(self.layers)):
            dQ = apply_hat_transpose(self.op, dP)
            grads[f"W{i}"] = cache["inputs"][i].T @ dQ
            if i == 0:
                break
            dH = dQ @ params[f"W{i}"].T
            if cache["scales"][i] is not None:
                dH = dH * cache["scales"][i]
            dP = dH * (cache["pre"][i - 1] > 0)
        return grads

    def embed(self, params, X):
        """Output of the last hidden layer (the raw features when ``layers == 1``)."""
        return self.forward(params, X)[1]["hidden"]


class SGC:
    """Logistic regression on k-hop ``A~_sym``-propagated features."""

    def __init__(self, graph: CsrGraph, d: int, c: int, k: int = 2,
                 kind=NormalizationKind.SYM):
        self.graph = graph
        self.d, self.c, self.k = d, c, k
        self.kind = NormalizationKind.parse(kind)
        self.dropout = 0.0
        self.decay_keys = ("W",)
        self._cache_key = None
        self._cache_val = None

    def init(self, seed: int) -> dict[str, np.ndarray]:
        return {"W": glorot(np.random.default_rng(seed), self.d, self.c)}

    def prepare(self, X):
        """Propagated features; computed once per feature matrix."""
        if self._cache_key is not X:
            S = np.asarray(X, dtype=np.float64)
            A = self.graph.normalized(self.kind)
            for _ in range(self.k):
                S = A @ S
            self._cache_key, self._cache_val = X, S
        return self._cache_val

    def forward(self, params, S, rng=None):
        return S @ params["W"], {"S": S}

    def backward(self, params, cache, dlogits):
        return {"W": cache["S"].T @ dlogits}

    def embed(self, params, S):
        return S


def gcnplus_forward(op: PropagationOperator, params, X, rng=None, dropout: float = 0.5):
    """Logits (pre-softmax) and backprop cache; train mode iff ``rng`` is given."""
    d, m = params["W1"].shape
    model = GCNPlus(op, d, params["W2"].shape[1], m, dropout=dropout, bias="b1" in params)
    return model.forward(params, np.asarray(X, dtype=np.float64), rng)


def vanilla_gcn_forward(graph: CsrGraph, layer_weights, X, rng=None, dropout: float = 0.5,
                        kind=NormalizationKind.SYM) -> np.ndarray:
    op = PropagationOperator(graph, PropagationConfig(Kernel.CASE1, kind, alpha=0.0, hops=0))
    return _deep_forward(op, layer_weights, X, rng, dropout)


def gcn_star_forward(graph: CsrGraph, layer_weights, alpha: float, beta: float, X, rng=None,
                     dropout: float = 0.5, kind=NormalizationKind.SYM) -> np.ndarray:
    op = PropagationOperator(graph, PropagationConfig(Kernel.CASE2, kind, alpha=alpha, beta=beta, hops=0))
    return _deep_forward(op, layer_weights, X, rng, dropout)


def _deep_forward(op, layer_weights, X, rng, dropout):
    layer_weights = list(layer_weights)
    W0 = layer_weights[0]
    model = DeepGCN(op, W0.shape[0], layer_weights[-1].shape[1], W0.shape[1],
                    layers=len(layer_weights), dropout=dropout)
    params = {f"W{i}": w for i, w in enumerate(layer_weights)}
    return model.forward(params, np.asarray(X, dtype=np.float64), rng)[0]


def sgc_forward(graph: CsrGraph, W, X, k: int) -> np.ndarray:
    model = SGC(graph, W.shape[0], W.shape[1], k)
    return model.forward({"W": W}, model.prepare(X))[0]


def _mask_index(mask, n):
    mask = np.asarray(mask)
    idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(np.int64)
    if idx.size == 0:
        raise EmptyMask("mask selects no nodes")
    if mask.dtype == bool and mask.size != n:
        raise DimensionMismatch(f"mask length {mask.size} != {n}")
    return idx


def cross_entropy(logits, labels, mask):
    """Mean softmax cross-entropy over masked rows and its gradient w.r.t. logits."""
    idx = _mask_index(mask, logits.shape[0])
    z = logits[idx]
    z = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    y = np.asarray(labels)[idx]
    loss = float(np.mean(lse - z[np.arange(idx.size), y]))
    p = np.exp(z - lse[:, None])
    p[np.arange(idx.size), y] -= 1.0
    dlogits = np.zeros_like(logits)
    dlogits[idx] = p / idx.size
    return loss, dlogits


def loss_and_grad(model, params, X, labels, mask, weight_decay: float = 0.0, rng=None):
    """Masked cross-entropy plus ``weight_decay/2 * ||W||^2`` on the decayed blocks."""
    logits, cache = model.forward(params, X, rng)
    loss, dlogits = cross_entropy(logits, labels, mask)
    grads = model.backward(params, cache, dlogits)
    if weight_decay:
        for k in model.decay_keys:
            loss += 0.5 * weight_decay * float(np.sum(params[k] ** 2))
            grads[k] = grads[k] + weight_decay * params[k]
    return loss, grads


def accuracy(logits, labels, mask) -> float:
    """Argmax accuracy on the mask; ties go to the lowest class index."""
    idx = _mask_index(mask, logits.shape[0])
    pred = np.argmax(logits[idx], axis=1)
    return float(np.mean(pred == np.asarray(labels)[idx]))


def evaluate(model, params, X, labels, mask) -> float:
    logits, _ = model.forward(params, X)
    return accuracy(logits, labels, mask)


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **hyper) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, **hyper)


def adam_step(params, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update; inputs are left untouched."""
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            g = np.zeros_like(p)
        m = b1 * state.m[k] + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * (g * g)
        new_params[k] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_m[k], new_v[k] = m, v
    return new_params, AdamState(new_m, new_v, t, b1, b2, state.eps)


@dataclass
class TrainConfig:
    model: str = "gcnplus"
    hidden: int = 64
    learning_rate: float = 0.01
    dropout: float = 0.5
    weight_decay: float = 5e-4
    max_epochs: int = 1500
    patience: int = 100
    seed: int = 0
    layers: int = 2
    bias: bool = False
    propagation: PropagationConfig = field(default_factory=PropagationConfig)

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidConfig(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.max_epochs < 1:
            raise InvalidConfig("max_epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must be in [0, 1)")
        if self.weight_decay < 0:
            raise InvalidConfig("weight_decay must be >= 0")
        if self.patience < 0:
            raise InvalidConfig("patience must be >= 0")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "propagation"}
        d["propagation"] = self.propagation.to_dict()
        return d


def build_model(graph: CsrGraph, d: int, c: int, config: TrainConfig):
    prop = config.propagation
    if config.model == "gcnplus":
        return GCNPlus(PropagationOperator(graph, prop), d, c, config.hidden, config.dropout, config.bias)
    if config.model == "mlp":
        op = PropagationOperator(graph, PropagationConfig(Kernel.CASE1, prop.kind, alpha=0.0, hops=0))
        return GCNPlus(op, d, c, config.hidden, config.dropout, config.bias)
    if config.model == "gcn":
        op = PropagationOperator(graph, PropagationConfig(Kernel.CASE1, prop.kind, alpha=0.0, hops=0))
        return DeepGCN(op, d, c, config.hidden, config.layers, config.dropout)
    if config.model == "gcn-star":
        if prop.kernel is not Kernel.CASE2:
            raise InvalidConfig("gcn-star needs a case2 propagation config")
        return DeepGCN(PropagationOperator(graph, prop), d, c, config.hidden, config.layers, config.dropout)
    return SGC(graph, d, c, k=prop.hops, kind=prop.kind)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_acc: float = float("nan")

    @property
    def epochs_ran(self) -> int:
        return len(self.train_loss)


def train(model, X, labels, masks, config: TrainConfig):
    """Full-batch Adam training with validation early stopping.

    An epoch counts as an improvement when validation accuracy rises, or stays
    equal while validation loss falls. Training stops once more than
    ``patience`` consecutive epochs pass without improvement. Returns the
    parameters of the best epoch and the history.
    """
    _mask_index(masks.train, X.shape[0])
    _mask_index(masks.val, X.shape[0])
    Xp = model.prepare(np.asarray(X, dtype=np.float64))
    params = model.init(config.seed)
    state = AdamState.zeros_like(params)
    drop_rng = np.random.default_rng([config.seed, 1])
    hist = TrainHistory()
    best_params, best_acc, best_loss = params, -1.0, math.inf
    stale = 0
    for epoch in range(config.max_epochs):
        loss, grads = loss_and_grad(model, params, Xp, labels, masks.train,
                                    config.weight_decay, drop_rng)
        if not math.isfinite(loss):
            raise NonFiniteLoss(f"training loss became {loss} at epoch {epoch}")
        params, state = adam_step(params, grads, state, config.learning_rate)
        logits, _ = model.forward(params, Xp)
        v_loss, _ = cross_entropy(logits, labels, masks.val)
        v_acc = accuracy(logits, labels, masks.val)
        hist.train_loss.append(loss)
        hist.val_loss.append(v_loss)
        hist.val_acc.append(v_acc)
        if v_acc > best_acc or (v_acc == best_acc and v_loss < best_loss):
            best_acc, best_loss, best_params = v_acc, v_loss, params
            hist.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    hist.best_val_acc = best_acc
    log.debug("trained %s: %d epochs, best val %.4f at %d", config.model,
              hist.epochs_ran, best_acc, hist.best_epoch)
    return best_params, hist
