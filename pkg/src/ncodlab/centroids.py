"""Class centroids in embedding space and the similarity soft labels built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadFraction, DegenerateCentroid, EmptyClass
from .numerics import ZERO_NORM

# guards ceil() against fraction * n landing a hair above an integer
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class ClassEmbeddings:
    vectors: np.ndarray      # (C, embedding_dim), unit rows
    used_counts: np.ndarray  # (C,)
    epoch: int = 0

    @property
    def num_classes(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class SoftLabel:
    values: np.ndarray
    class_index: int


def keep_fraction(epoch: int, total_epochs: int, final_fraction: float = 0.5) -> float:
    """Share of each class (lowest ``u`` first) that feeds its centroid.

    Linear from 1 at the first epoch to ``final_fraction`` at the last one.
    """
    if not 0.0 < final_fraction <= 1.0:
        raise BadFraction(f"final_fraction must be in (0, 1], got {final_fraction}")
    if total_epochs < 1 or not 0 <= epoch < total_epochs:
        raise BadFraction(f"epoch {epoch} outside [0, {total_epochs})")
    if total_epochs == 1:
        return 1.0
    return 1.0 - (1.0 - final_fraction) * epoch / (total_epochs - 1)


def subset_size(fraction: float, n_c: int) -> int:
    return max(1, min(n_c, math.ceil(fraction * n_c - _CEIL_SLACK)))


def select_lowest_u(class_indices: np.ndarray, u: np.ndarray, fraction: float) -> np.ndarray:
    """Indices of the ``ceil(fraction * n_c)`` smallest-``u`` samples; ties by index."""
    idx = np.sort(np.asarray(class_indices))
    order = np.lexsort((idx, u[idx]))
    return idx[order[: subset_size(fraction, len(idx))]]


def compute_centroids(embeddings, noisy_labels, u, fraction: float,
                      num_classes: int | None = None, epoch: int = 0) -> ClassEmbeddings:
    """Normalized mean of raw embeddings over each class's lowest-``u`` subset."""
    if not 0.0 < fraction <= 1.0:
        raise BadFraction(f"fraction must be in (0, 1], got {fraction}")
    emb = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(noisy_labels, dtype=np.int64)
    u = np.asarray(u, dtype=np.float64)
    C = int(labels.max()) + 1 if num_classes is None else int(num_classes)
    vectors = np.empty((C, emb.shape[1]))
    counts = np.empty(C, dtype=np.int64)
    for c in range(C):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            raise EmptyClass(f"class {c} has no training samples")
        chosen = select_lowest_u(members, u, fraction)
        mean = emb[chosen].mean(axis=0)
        norm = float(np.sqrt(mean @ mean))
        if not norm > ZERO_NORM:
            raise DegenerateCentroid(f"class {c} mean embedding has norm {norm:.3g}")
        vectors[c] = mean / norm
        counts[c] = chosen.size
    return ClassEmbeddings(vectors, counts, epoch)


def cosine_to_centroid(embeddings, labels, centroids: ClassEmbeddings) -> np.ndarray:
    """Raw cosine between each embedding and its labeled class centroid.

    Zero-norm embeddings get similarity 0.
    """
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    norms = np.sqrt(np.einsum("ij,ij->i", emb, emb))
    raw = np.einsum("ij,ij->i", emb, centroids.vectors[np.asarray(labels)])
    ok = norms > ZERO_NORM
    return np.where(ok, raw / np.where(ok, norms, 1.0), 0.0)


def soft_label(h, label: int, centroids: ClassEmbeddings) -> SoftLabel:
    values = np.zeros(centroids.num_classes)
    values[label] = max(float(np.dot(h, centroids.vectors[label])), 0.0)
    return SoftLabel(values, int(label))
