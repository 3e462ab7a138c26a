"""Training loop for plain cross-entropy, NCOD and NCOD+.

Each epoch: embed every training sample under the current network, build the
class centroids from the lowest-``u`` share of each class, then sweep shuffled
minibatches. Every minibatch takes one SGD step on the network using the
discounted cross-entropy (plus the NCOD+ regularizers) and then one step on
the ``u`` entries of its samples, both from the same forward pass.

Random streams are derived from ``TrainConfig.seed``: ``init`` (weights),
``u`` (discount init), ``shuffle`` (batch order) and ``augment`` (jitter views).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .centroids import ClassEmbeddings, compute_centroids, keep_fraction
from .data import Dataset, augment
from .errors import ConfigInvalid, DimMismatch, EmptyGroup, OneClassOnly
from .metrics import EpochRecord, detection_auc, group_mean
from .model import Gradients, MlpModel, forward, init_model, sgd_step
from .ncod_loss import UStore, init_u, update_u_batch
from .numerics import Rng

log = logging.getLogger(__name__)

MODES = ("ce", "ncod", "ncod_plus")
NCOD_PLUS_LAMBDA_C = 0.9
NCOD_PLUS_LAMBDA_B = 0.1


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "ncod"
    epochs: int = 60
    batch_size: int = 32
    lr_theta: float = 0.02
    lr_u: float = 0.1
    weight_decay_theta: float = 5e-4
    momentum: float = 0.0           # heavy-ball SGD momentum, off by default
    weight_decay_u: float = 1e-8
    lambda_c: float | None = None   # None: 0.9 for ncod_plus, else 0
    lambda_b: float | None = None   # None: 0.1 for ncod_plus, else 0
    final_keep_fraction: float = 0.5
    jitter_std: float = 0.5
    seed: int = 0
    hidden_dims: tuple = (64, 64)
    layer_dims: tuple | None = None  # full [d, h1, ..., C]; overrides hidden_dims
    lr_milestones: tuple = ()
    lr_gamma: float = 0.1
    shuffle: bool = True
    backend: str | None = None       # None: NCODLAB_BACKEND or auto

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigInvalid("mode", f"must be one of {MODES}, got {self.mode!r}")
        plus = self.mode == "ncod_plus"
        lc = (NCOD_PLUS_LAMBDA_C if plus else 0.0) if self.lambda_c is None else float(self.lambda_c)
        lb = (NCOD_PLUS_LAMBDA_B if plus else 0.0) if self.lambda_b is None else float(self.lambda_b)
        if not plus and (lc != 0.0 or lb != 0.0):
            raise ConfigInvalid("lambda_c", f"regularizer weights must be 0 in mode {self.mode!r}")
        object.__setattr__(self, "lambda_c", lc)
        object.__setattr__(self, "lambda_b", lb)
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "lr_milestones", tuple(int(m) for m in self.lr_milestones))
        if self.layer_dims is not None:
            object.__setattr__(self, "layer_dims", tuple(int(h) for h in self.layer_dims))
        checks = [
            ("epochs", self.epochs >= 1),
            ("batch_size", self.batch_size >= 1),
            ("lr_theta", self.lr_theta > 0),
            ("lr_u", self.lr_u >= 0),
            ("weight_decay_theta", self.weight_decay_theta >= 0),
            ("momentum", 0 <= self.momentum < 1),
            ("weight_decay_u", self.weight_decay_u >= 0),
            ("lambda_c", lc >= 0),
            ("lambda_b", lb >= 0),
            ("final_keep_fraction", 0 < self.final_keep_fraction <= 1),
            ("jitter_std", self.jitter_std >= 0),
            ("lr_gamma", self.lr_gamma > 0),
            ("hidden_dims", all(h > 0 for h in self.hidden_dims)),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigInvalid(name, f"invalid value {getattr(self, name)!r}")

    def dims_for(self, num_features: int, num_classes: int) -> tuple:
        if self.layer_dims is not None:
            dims = self.layer_dims
            if dims[0] != num_features or dims[-1] != num_classes:
                raise ConfigInvalid("layer_dims", f"{dims} does not fit {num_features} features / {num_classes} classes")
            return dims
        return (num_features, *self.hidden_dims, num_classes)

    def lr_at(self, epoch: int) -> float:
        return self.lr_theta * self.lr_gamma ** sum(epoch >= m for m in self.lr_milestones)


@dataclass
class TrainReport:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> EpochRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def predict(model: MlpModel, x) -> int | np.ndarray:
    """Argmax of the network output; ties go to the lowest class index."""
    return np.argmax(forward(model, x)[1], axis=-1)


def evaluate(model: MlpModel, test_set: Dataset) -> float:
    """Accuracy of ``predict`` against the clean labels."""
    if test_set.dim != model.dims[0]:
        raise DimMismatch(f"dataset has {test_set.dim} features, model expects {model.dims[0]}")
    return float(np.mean(predict(model, test_set.features) == test_set.clean_labels))


def _group_stats(values, flip_mask):
    """``(clean mean, noisy mean)``; an empty group reports None, the other still its mean."""
    try:
        noisy, clean = group_mean(values, flip_mask)
    except EmptyGroup:
        if not flip_mask.any():
            return float(np.mean(values)), None
        return None, float(np.mean(values))
    return clean, noisy


def train(train_set: Dataset, test_set: Dataset, config: TrainConfig, model: MlpModel | None = None,
          sink=None, observer=None):
    """Run the configured training and return ``(model, u_store, report)``.

    ``model`` (optional) is trained in place instead of a fresh He-initialized
    network. ``sink`` receives one JSON line per epoch; ``observer`` is called
    as ``observer(epoch, model, u_store, centroids, record)``.
    """
    kernel = kernels.get_backend(config.backend)
    C = train_set.num_classes
    dims = config.dims_for(train_set.dim, C)
    root = Rng(config.seed)
    if model is None:
        model = init_model(dims, root.child("init"))
    elif model.dims != dims:
        raise ConfigInvalid("layer_dims", f"supplied model has dims {model.dims}, expected {dims}")

    n = len(train_set)
    X = train_set.features
    y = train_set.noisy_labels
    ce = config.mode == "ce"
    if ce:
        ustore = UStore(np.zeros(n), 0.0, 0.0)
    else:
        ustore = init_u(n, root.child("u"), config.lr_u, config.weight_decay_u)
    shuffle_rng = root.child("shuffle")
    aug_rng = root.child("augment")
    use_aug = config.mode == "ncod_plus"

    dims_arr = np.array(dims, dtype=np.intp)
    grad = Gradients(dims)
    velocity = np.zeros_like(model.flat) if config.momentum else None
    report = TrainReport()
    embeddings = forward(model, X)[0]

    for epoch in range(config.epochs):
        frac = 1.0 if ce else keep_fraction(epoch, config.epochs, config.final_keep_fraction)
        cents: ClassEmbeddings = compute_centroids(embeddings, y, ustore.u, frac, C, epoch)
        order = shuffle_rng.permutation(n) if config.shuffle else np.arange(n)
        lr = config.lr_at(epoch)
        sims = np.empty(n)
        sums = np.zeros(4)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = X[idx]
            xa = augment(xb, config.jitter_std, aug_rng) if use_aug else None
            l1, l2, lc, lb, probs_c, batch_sims = kernel.ncod_batch(
                model.flat, dims_arr, xb, y[idx], ustore.u[idx], cents.vectors, xa,
                config.lambda_c, config.lambda_b, not ce, grad.flat)
            sgd_step(model, grad, lr, config.weight_decay_theta, config.momentum, velocity)
            if not ce:
                update_u_batch(ustore, idx, probs_c)
            sims[idx] = batch_sims
            sums += len(idx) * np.array([l1, l2, lc, lb])

        l1, l2, lc, lb = sums / n
        embeddings, probs, _ = forward(model, X)
        sim_clean, sim_noisy = _group_stats(sims, train_set.flip_mask)
        u_clean, u_noisy = _group_stats(ustore.u, train_set.flip_mask)
        try:
            auc = detection_auc(ustore.u, train_set.flip_mask)
        except OneClassOnly:
            auc = None
        record = EpochRecord(
            epoch=epoch,
            l1=float(l1), l2=float(l2), l_c=float(lc), l_b=float(lb),
            total=float(l1 + l2 + config.lambda_c * lc + config.lambda_b * lb),
            train_accuracy=float(np.mean(np.argmax(probs, axis=1) == y)),
            test_accuracy=evaluate(model, test_set),
            mean_similarity_clean=sim_clean, mean_similarity_noisy=sim_noisy,
            mean_u_clean=u_clean, mean_u_noisy=u_noisy, u_auc=auc,
            keep_fraction_used=float(frac),
        )
        report.records.append(record)
        if sink is not None:
            sink.write(record.to_json() + "\n")
            sink.flush()
        if observer is not None:
            observer(epoch, model, ustore, cents, record)
        log.debug("epoch %d test_acc=%.4f u_auc=%s", epoch, record.test_accuracy, auc)

    return model, ustore, report


def with_mode(config: TrainConfig, mode: str, **overrides) -> TrainConfig:
    """Copy of ``config`` in another mode, with mode-dependent lambdas reset."""
    return replace(config, mode=mode, lambda_c=overrides.pop("lambda_c", None),
                   lambda_b=overrides.pop("lambda_b", None), **overrides)
