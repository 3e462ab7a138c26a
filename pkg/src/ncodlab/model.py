"""Fully connected ReLU classifier with hand-written backpropagation.

All parameters live in one contiguous ``float64`` buffer; per-layer weight
matrices and bias vectors are views into it. Layer ``l`` occupies
``W_l`` (``dims[l+1] x dims[l]``, row-major) followed by ``b_l``. The same
layout is used by the compiled kernels and by checkpoint files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadDims, DimMismatch, ParseError, ShapeMismatch, StaleCache
from .numerics import Rng, softmax

CHECKPOINT_MAGIC = b"NCODMLP\x00"
CHECKPOINT_VERSION = 1


def param_count(dims) -> int:
    return sum(dims[l + 1] * dims[l] + dims[l + 1] for l in range(len(dims) - 1))


def _layer_views(flat: np.ndarray, dims):
    weights, biases = [], []
    off = 0
    for l in range(len(dims) - 1):
        n_in, n_out = dims[l], dims[l + 1]
        weights.append(flat[off:off + n_out * n_in].reshape(n_out, n_in))
        off += n_out * n_in
        biases.append(flat[off:off + n_out])
        off += n_out
    return weights, biases


def _check_dims(layer_dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise BadDims(f"need >= 2 positive layer sizes, got {list(layer_dims)}")
    return dims


class _Flat:
    """Flat buffer with per-layer views; shared by model and gradients."""

    def __init__(self, dims, flat: np.ndarray | None = None):
        self.dims = _check_dims(dims)
        n = param_count(self.dims)
        if flat is None:
            flat = np.zeros(n, dtype=np.float64)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (n,):
            raise ShapeMismatch(f"expected {n} parameters, got {flat.shape}")
        self.flat = flat
        self.weights, self.biases = _layer_views(flat, self.dims)

    @property
    def num_layers(self) -> int:
        return len(self.dims) - 1


class MlpModel(_Flat):
    """Classifier ``dims[0] -> ... -> dims[-1]`` with ReLU hidden layers.

    ``version`` increments on every parameter update so that a forward cache
    can be checked for staleness.
    """

    def __init__(self, dims, flat: np.ndarray | None = None):
        super().__init__(dims, flat)
        self.version = 0

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return self.dims

    @property
    def embedding_dim(self) -> int:
        return self.dims[-2]

    @property
    def num_classes(self) -> int:
        return self.dims[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(self.dims, self.flat.copy())

    def touch(self) -> None:
        self.version += 1


class Gradients(_Flat):
    pass


@dataclass
class ForwardCache:
    model_id: int
    version: int
    inputs: np.ndarray
    pre: list = field(default_factory=list)   # pre-activations per layer
    post: list = field(default_factory=list)  # post-activations; post[0] is the input
    batched: bool = False


def init_model(layer_dims, rng: Rng) -> MlpModel:
    """He-initialized weights (std ``sqrt(2/fan_in)``), zero biases."""
    model = MlpModel(layer_dims)
    for W in model.weights:
        W[...] = rng.normal(0.0, np.sqrt(2.0 / W.shape[1]), size=W.shape)
    return model


def forward(model: MlpModel, x):
    """Return ``(embedding, probs, cache)``.

    ``x`` may be a single vector or a ``(batch, d)`` matrix. The embedding is
    the post-activation output of the second-to-last layer (the raw input for
    a network without hidden layers).
    """
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    if x.shape[-1] != model.dims[0] or x.ndim not in (1, 2):
        raise DimMismatch(f"input has shape {x.shape}, model expects {model.dims[0]} features")
    a = x
    cache = ForwardCache(id(model), model.version, x, batched=batched)
    cache.post.append(a)
    L = model.num_layers
    for l in range(L):
        z = a @ model.weights[l].T + model.biases[l]
        cache.pre.append(z)
        if l < L - 1:
            a = np.maximum(z, 0.0)
            cache.post.append(a)
    embedding = cache.post[-1]
    probs = softmax(cache.pre[-1])
    return embedding, probs, cache


def backward(model: MlpModel, cache: ForwardCache, dloss_dlogits) -> Gradients:
    """Reverse-mode gradients given the loss gradient w.r.t. the logits.

    For a batched cache the result is the gradient of the *sum* of the
    per-sample losses; callers wanting a mean scale ``dloss_dlogits``.
    """
    if cache.model_id != id(model) or cache.version != model.version:
        raise StaleCache("forward cache does not match current model parameters")
    d = np.asarray(dloss_dlogits, dtype=np.float64)
    if d.shape != cache.pre[-1].shape:
        raise DimMismatch(f"logit gradient shape {d.shape} != {cache.pre[-1].shape}")
    grads = Gradients(model.dims)
    if not cache.batched:
        d = d[None, :]
    for l in range(model.num_layers - 1, -1, -1):
        a_prev = cache.post[l] if cache.batched else cache.post[l][None, :]
        grads.weights[l][...] = d.T @ a_prev
        grads.biases[l][...] = d.sum(axis=0)
        if l > 0:
            z_prev = cache.pre[l - 1] if cache.batched else cache.pre[l - 1][None, :]
            d = (d @ model.weights[l]) * (z_prev > 0)
    return grads


def sgd_step(model: MlpModel, grads: Gradients, lr: float, weight_decay: float = 0.0,
             momentum: float = 0.0, velocity: np.ndarray | None = None) -> None:
    """``theta <- theta - lr * (grad + weight_decay * theta)`` in place.

    With ``momentum > 0`` the step uses heavy-ball velocity instead:
    ``v <- momentum * v + (grad + weight_decay * theta)``, ``theta <- theta - lr * v``,
    where ``velocity`` is a caller-owned buffer updated in place.
    """
    if lr <= 0 or weight_decay < 0 or not 0 <= momentum < 1:
        raise ValueError("need lr > 0, weight_decay >= 0 and 0 <= momentum < 1")
    g = grads.flat if isinstance(grads, Gradients) else np.asarray(grads, dtype=np.float64)
    if isinstance(grads, Gradients) and grads.dims != model.dims:
        raise ShapeMismatch(f"gradient dims {grads.dims} != model dims {model.dims}")
    if g.shape != model.flat.shape:
        raise ShapeMismatch(f"gradient has {g.shape}, model has {model.flat.shape}")
    if momentum == 0.0:
        model.flat -= lr * (g + weight_decay * model.flat)
    else:
        if velocity is None or velocity.shape != model.flat.shape:
            raise ShapeMismatch("momentum needs a velocity buffer shaped like the parameters")
        velocity *= momentum
        velocity += g + weight_decay * model.flat
        model.flat -= lr * velocity
    model.touch()


def predict_proba(model: MlpModel, x) -> np.ndarray:
    return forward(model, x)[1]


def embed(model: MlpModel, x) -> np.ndarray:
    return forward(model, x)[0]


def save_checkpoint(model: MlpModel, path) -> None:
    """Binary checkpoint, little-endian.

    ``magic(8) | u32 version | u32 ndims | u32 dims[ndims] | f64 params``
    with params in the flat layer layout described in the module docstring.
    """
    with open(path, "wb") as fh:
        write_flat_record(fh, model.dims, model.flat)


def write_flat_record(fh, dims, flat: np.ndarray) -> None:
    fh.write(CHECKPOINT_MAGIC)
    fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(dims)))
    fh.write(struct.pack(f"<{len(dims)}I", *dims))
    fh.write(np.ascontiguousarray(flat, dtype="<f8").tobytes())


def load_checkpoint(path) -> MlpModel:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ParseError(f"{path}: not an ncodlab checkpoint")
    version, ndims = struct.unpack_from("<II", data, 8)
    if version != CHECKPOINT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {version}")
    dims = struct.unpack_from(f"<{ndims}I", data, 16)
    off = 16 + 4 * ndims
    n = param_count(dims)
    if len(data) - off != 8 * n:
        raise ParseError(f"{path}: expected {n} parameters, found {(len(data) - off) / 8:g}")
    flat = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(np.float64)
    return MlpModel(dims, flat)
