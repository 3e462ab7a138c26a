"""Outlier-discounted loss terms, their logit gradients, and the per-sample ``u`` store.

``L1`` is cross-entropy between the discounted prediction ``f + u*y`` and the
centroid soft label; it trains the network only. ``L2`` is the squared error
between ``f + u*y`` and the hard label; it trains ``u`` only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatch, IndexOutOfRange
from .numerics import LOG_EPS, Rng, safe_log

U_INIT_MEAN = 1e-8
U_INIT_STD = 1e-9


@dataclass
class UStore:
    u: np.ndarray
    lr_u: float = 0.1
    weight_decay_u: float = 1e-8

    def __len__(self) -> int:
        return len(self.u)

    def copy(self) -> "UStore":
        return UStore(self.u.copy(), self.lr_u, self.weight_decay_u)


@dataclass(frozen=True)
class LossTerms:
    l1: float = 0.0
    l2: float = 0.0
    l_c: float = 0.0
    l_b: float = 0.0
    total: float = 0.0


def init_u(n: int, rng: Rng, lr_u: float = 0.1, weight_decay_u: float = 1e-8,
           mean: float = U_INIT_MEAN, std: float = U_INIT_STD) -> UStore:
    if n < 1:
        raise ValueError("need at least one sample")
    u = np.clip(rng.normal(mean, std, size=n), 0.0, 1.0)
    return UStore(u, lr_u, weight_decay_u)


def _soft_value(soft, label: int) -> float:
    if hasattr(soft, "values"):
        return float(soft.values[label])
    return float(soft)


def loss_l1(probs, u_i: float, label: int, soft) -> float:
    """``-soft_c * log(max(p_c + u_i, eps))``; ``soft`` is a SoftLabel or its scalar."""
    s = _soft_value(soft, label)
    if s == 0.0:
        return 0.0
    return float(-s * safe_log(probs[label] + u_i))


def grad_l1_logits(probs, u_i: float, label: int, soft) -> np.ndarray:
    """d loss_l1 / d logits with ``u_i`` held constant."""
    p = np.asarray(probs, dtype=np.float64)
    s = _soft_value(soft, label)
    shifted = p[label] + u_i
    if s == 0.0 or not shifted > LOG_EPS:
        return np.zeros_like(p)
    g = -s / shifted
    out = -g * p[label] * p
    out[label] += g * p[label]
    return out


def loss_l2(probs, u_i: float, label: int) -> float:
    p = np.asarray(probs, dtype=np.float64)
    r = p.copy()
    r[label] += u_i - 1.0
    return float(r @ r)


def update_u(store: UStore, i: int, probs_c: float) -> None:
    """One projected gradient step on ``u_i`` against ``L2`` (network held fixed)."""
    if not 0 <= i < len(store.u):
        raise IndexOutOfRange(f"sample index {i} outside [0, {len(store.u)})")
    ui = store.u[i]
    grad = 2.0 * (probs_c + ui - 1.0) + 2.0 * store.weight_decay_u * ui
    store.u[i] = min(max(ui - store.lr_u * grad, 0.0), 1.0)


def update_u_batch(store: UStore, indices, probs_c) -> None:
    """Vectorized :func:`update_u` over distinct sample indices."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= len(store.u)):
        raise IndexOutOfRange("sample index outside u store")
    ui = store.u[idx]
    grad = 2.0 * (np.asarray(probs_c) + ui - 1.0) + 2.0 * store.weight_decay_u * ui
    store.u[idx] = np.clip(ui - store.lr_u * grad, 0.0, 1.0)


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(np.sum(p * (safe_log(p) - safe_log(q))))


def consistency_reg(probs_orig, probs_aug) -> float:
    """``KL(orig || aug)``; the original view is a fixed target."""
    return kl_divergence(probs_orig, probs_aug)


def class_balance_reg(batch_probs) -> float:
    """``KL(uniform || batch-mean prediction)``."""
    P = np.asarray(batch_probs, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] == 0:
        raise EmptyBatch("class balance needs a non-empty batch")
    C = P.shape[1]
    return kl_divergence(np.full(C, 1.0 / C), P.mean(axis=0))


def total_loss(l1, l2, l_c=0.0, l_b=0.0, lambda_c: float = 0.0, lambda_b: float = 0.0,
               mode: str = "ncod") -> LossTerms:
    """Combine per-sample ``l1``/``l2`` (batch-averaged) with the regularizers.

    ``l_c`` may be per-sample (averaged here); ``l_b`` is a batch scalar. In
    ``ncod`` mode the regularizer weights are forced to zero.
    """
    m1 = float(np.mean(l1)) if np.size(l1) else 0.0
    m2 = float(np.mean(l2)) if np.size(l2) else 0.0
    mc = float(np.mean(l_c)) if np.size(l_c) else 0.0
    mb = float(l_b)
    if mode != "ncod_plus":
        lambda_c = lambda_b = 0.0
    return LossTerms(m1, m2, mc, mb, m1 + m2 + lambda_c * mc + lambda_b * mb)
