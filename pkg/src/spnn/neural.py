"""Dense neural-network core: affine layers, exact backprop, SGD/SGLD, AUC.

The multilayer perceptron body is a chain h_{l+1} = f_l(h_l @ W_l + b_l) with
f_l in {sigmoid, relu, identity}.  Classification heads (softmax for
multiclass, sigmoid for binary) are kept outside the body so the head's
cross-entropy gradient can be computed in the fused, numerically stable form
(probabilities minus targets).

Loss convention: cross_entropy reports the batch mean, while gradients flow
batch-summed; sgd_step divides by the batch size when applying the update.

Checkpoint format: magic "SPNN", version u16, layer count u16, then per layer
rows u32, cols u32, activation tag u8, little-endian f64 weights (row-major)
followed by the f64 bias row.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabels, DimensionMismatch, StaleCache

_MAGIC = b"SPNN"
_VERSION = 1
_ACT_TAGS = {"identity": 0, "sigmoid": 1, "relu": 2, "softmax": 3}
_TAG_ACTS = {v: k for k, v in _ACT_TAGS.items()}

PROB_FLOOR = 1e-12


# -- activations -----------------------------------------------------------------

def sigmoid(z: np.ndarray) -> np.ndarray:
    # branch-wise evaluation avoids overflow for large |z|
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=1, keepdims=True)


def activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "relu":
        return relu(z)
    raise ValueError(f"unknown body activation {kind!r}")


def activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    """Elementwise derivative of the body activation at pre-activation z."""
    if kind == "identity":
        return np.ones_like(z)
    if kind == "sigmoid":
        s = sigmoid(z)
        return s * (1.0 - s)
    if kind == "relu":
        return np.where(z > 0, 1.0, 0.0)
    raise ValueError(f"unknown body activation {kind!r}")


# -- layers and model --------------------------------------------------------------

@dataclass
class AffineLayer:
    weights: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray     # (out_dim,)
    activation: str

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]


def glorot_init(in_dim: int, out_dim: int, rng: np.random.Generator) -> np.ndarray:
    a = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-a, a, size=(in_dim, out_dim))


def make_layer(in_dim: int, out_dim: int, activation: str, rng: np.random.Generator) -> AffineLayer:
    return AffineLayer(glorot_init(in_dim, out_dim, rng), np.zeros(out_dim), activation)


class Mlp:
    """Chain of affine layers with body activations."""

    def __init__(self, layers: list[AffineLayer]):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DimensionMismatch(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        self.layers = layers

    def forward(self, x: np.ndarray):
        """Returns (output, cache); the cache feeds backward()."""
        if x.shape[1] != self.layers[0].in_dim:
            raise DimensionMismatch(
                f"input width {x.shape[1]} != first layer in_dim {self.layers[0].in_dim}"
            )
        cache = []
        h = x
        for layer in self.layers:
            z = h @ layer.weights + layer.bias
            cache.append((h, z))
            h = activate(z, layer.activation)
        return h, cache

    def backward(self, cache, grad, grad_is_preactivation: bool = False):
        """Exact gradients of every layer plus the gradient w.r.t. the input.

        `grad` is dL/d(output) of the last layer, or dL/d(pre-activation) when
        grad_is_preactivation is set (fused head case).  Gradients are summed
        over the batch, matching the sgd_step convention.
        """
        if len(cache) != len(self.layers):
            raise StaleCache("cache depth does not match the layer stack")
        grads = [None] * len(self.layers)
        da = grad
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            h_in, z = cache[i]
            if h_in.shape[1] != layer.in_dim or z.shape[1] != layer.out_dim:
                raise StaleCache("cache shapes do not match the layer stack")
            if i == len(self.layers) - 1 and grad_is_preactivation:
                dz = da
            else:
                dz = da * activate_grad(z, layer.activation)
            grads[i] = (h_in.T @ dz, dz.sum(axis=0))
            da = dz @ layer.weights.T
        return grads, da


# -- heads and loss ------------------------------------------------------------------

def predict_head(h: np.ndarray, head: AffineLayer) -> np.ndarray:
    """Class probabilities from the final hidden layer."""
    if h.shape[1] != head.in_dim:
        raise DimensionMismatch(f"hidden width {h.shape[1]} != head in_dim {head.in_dim}")
    z = h @ head.weights + head.bias
    if head.activation == "softmax":
        return softmax(z)
    if head.activation == "sigmoid":
        return sigmoid(z)
    raise ValueError(f"unsupported head activation {head.activation!r}")


def cross_entropy(y_hat: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood with a probability floor of 1e-12."""
    y = np.asarray(y)
    p = np.clip(y_hat, PROB_FLOOR, 1.0)
    if y_hat.shape[1] == 1:
        p = p[:, 0]
        q = np.clip(1.0 - y_hat[:, 0], PROB_FLOOR, 1.0)
        ll = np.where(y == 1, np.log(p), np.log(q))
    else:
        ll = np.log(p[np.arange(len(y)), y.astype(int)])
    return float(-np.mean(ll))


def output_gradient(y_hat: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Batch-summed cross-entropy gradient w.r.t. the head logits.

    For both the sigmoid and softmax heads this is probabilities minus
    (one-hot) targets.
    """
    y = np.asarray(y)
    if y_hat.shape[1] == 1:
        return y_hat - y.reshape(-1, 1).astype(np.float64)
    onehot = np.zeros_like(y_hat)
    onehot[np.arange(len(y)), y.astype(int)] = 1.0
    return y_hat - onehot


def head_backward(h: np.ndarray, head: AffineLayer, logit_grad: np.ndarray):
    """Gradients of the head parameters and of the incoming hidden layer."""
    dw = h.T @ logit_grad
    db = logit_grad.sum(axis=0)
    dh = logit_grad @ head.weights.T
    return dw, db, dh


# -- optimizers -----------------------------------------------------------------------

def sgd_step(param: np.ndarray, grad: np.ndarray, lr: float, batch_size: int) -> np.ndarray:
    """Mini-batch SGD on a batch-summed gradient: param - (lr / |B|) * grad."""
    return param - (lr / batch_size) * grad


def sgld_step(param: np.ndarray, grad: np.ndarray, lr: float, batch_size: int,
              rng: np.random.Generator) -> np.ndarray:
    """Langevin step: param - ((lr / 2) * mean_grad + noise), noise ~ N(0, lr).

    `grad` is batch-summed like in sgd_step; the mean is taken here.
    """
    noise = rng.normal(0.0, np.sqrt(lr), size=param.shape)
    return param - ((lr / 2.0) * (grad / batch_size) + noise)


# -- evaluation -----------------------------------------------------------------------

def auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC with tie averaging."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("need at least one positive and one negative label")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    avg_rank = np.cumsum(counts) - (counts - 1) / 2.0
    ranks = avg_rank[inverse]
    pos_rank_sum = float(np.sum(ranks[labels == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# -- checkpoints ------------------------------------------------------------------------

def model_to_bytes(layers: list[AffineLayer]) -> bytes:
    parts = [_MAGIC, struct.pack("<HH", _VERSION, len(layers))]
    for layer in layers:
        rows, cols = layer.weights.shape
        parts.append(struct.pack("<IIB", rows, cols, _ACT_TAGS[layer.activation]))
        parts.append(layer.weights.astype("<f8").tobytes())
        parts.append(layer.bias.astype("<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes) -> list[AffineLayer]:
    if data[:4] != _MAGIC:
        raise ValueError("not a model checkpoint (bad magic)")
    version, count = struct.unpack_from("<HH", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    offset = 8
    layers = []
    for _ in range(count):
        rows, cols, tag = struct.unpack_from("<IIB", data, offset)
        offset += 9
        w = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols)
        offset += rows * cols * 8
        b = np.frombuffer(data, dtype="<f8", count=cols, offset=offset)
        offset += cols * 8
        layers.append(AffineLayer(w.astype(np.float64), b.astype(np.float64), _TAG_ACTS[tag]))
    return layers


def save_model(path, layers: list[AffineLayer]) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(layers))


def load_model(path) -> list[AffineLayer]:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
