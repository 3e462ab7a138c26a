"""Datasets: synthetic Gaussian clusters, CSV I/O, stratified splits, jitter views.

CSV layout: header ``f0,f1,...,f{d-1},label``, one sample per row, 0-based
integer labels, reals written with 17 significant digits. A noise sidecar
(same stem, ``.noise`` suffix) holds ``index,clean,noisy`` rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ClassTooSmall, DimInconsistency, IndexOutOfRange, ParseError, PlacementFailure
from .numerics import Rng

MAX_PLACEMENT_REJECTIONS = 10_000


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    clean_labels: np.ndarray
    noisy_labels: np.ndarray
    flip_mask: np.ndarray
    num_classes: int

    def __post_init__(self):
        n = self.features.shape[0]
        for name in ("clean_labels", "noisy_labels", "flip_mask"):
            if len(getattr(self, name)) != n:
                raise DimInconsistency(f"{name} has {len(getattr(self, name))} entries, features have {n}")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def clean(cls, features, labels, num_classes: int | None = None) -> "Dataset":
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        C = int(labels.max()) + 1 if num_classes is None else int(num_classes)
        return cls(features, labels, labels.copy(), np.zeros(len(labels), dtype=bool), C)

    def with_noisy_labels(self, noisy) -> "Dataset":
        noisy = np.asarray(noisy, dtype=np.int64)
        return replace(self, noisy_labels=noisy, flip_mask=noisy != self.clean_labels)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(np.ascontiguousarray(self.features[idx]), self.clean_labels[idx],
                       self.noisy_labels[idx], self.flip_mask[idx], self.num_classes)


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 4
    per_class: int = 250
    dim: int = 16
    separation: float = 6.0
    spread: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2 or self.per_class < 2 or self.dim < 1:
            raise ValueError("need num_classes >= 2, per_class >= 2, dim >= 1")
        if not (self.separation > 0 and self.spread > 0):
            raise ValueError("separation and spread must be positive")


def _place_centers(spec: SynthSpec, rng: Rng) -> np.ndarray:
    centers: list[np.ndarray] = []
    rejections = 0
    while len(centers) < spec.num_classes:
        v = rng.normal(size=spec.dim)
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        c = spec.separation * v / norm
        if all(np.linalg.norm(c - o) >= spec.separation for o in centers):
            centers.append(c)
            continue
        rejections += 1
        if rejections >= MAX_PLACEMENT_REJECTIONS:
            raise PlacementFailure(
                f"could not place {spec.num_classes} centers {spec.separation} apart in {spec.dim}-d")
    return np.array(centers)


def synth_clusters(spec: SynthSpec, rng: Rng | None = None) -> Dataset:
    """Isotropic Gaussian blobs whose centers sit on a sphere of radius ``separation``.

    Rows are class-major. Uses ``Rng(spec.seed)`` when ``rng`` is omitted.
    """
    rng = Rng(spec.seed) if rng is None else rng
    centers = _place_centers(spec, rng)
    labels = np.repeat(np.arange(spec.num_classes), spec.per_class)
    noise = rng.normal(0.0, 1.0, size=(len(labels), spec.dim))
    features = centers[labels] + spec.spread * noise
    return Dataset.clean(features, labels, spec.num_classes)


def one_hot(label: int, num_classes: int) -> np.ndarray:
    if not 0 <= label < num_classes:
        raise IndexOutOfRange(f"label {label} outside [0, {num_classes})")
    e = np.zeros(num_classes)
    e[label] = 1.0
    return e


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_csv(dataset: Dataset, path) -> None:
    """Write features and *clean* labels."""
    d = dataset.dim
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join([f"f{j}" for j in range(d)] + ["label"]) + "\n")
        for row, y in zip(dataset.features, dataset.clean_labels):
            fh.write(",".join([_fmt(v) for v in row] + [str(int(y))]) + "\n")


def load_csv(path, num_classes: int | None = None) -> Dataset:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file", 1)
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    if d < 1 or header != [f"f{j}" for j in range(d)] + ["label"]:
        raise ParseError(f"{path}: header must be f0,...,f{{d-1}},label", 1)
    feats = np.empty((len(rows) - 1, d))
    labels = np.empty(len(rows) - 1, dtype=np.int64)
    for k, row in enumerate(rows[1:]):
        line = k + 2
        if len(row) != d + 1:
            raise DimInconsistency(f"{path}: line {line} has {len(row)} fields, expected {d + 1}")
        try:
            feats[k] = [float(v) for v in row[:d]]
            labels[k] = int(row[d])
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}", line) from None
        if labels[k] < 0 or not np.all(np.isfinite(feats[k])):
            raise ParseError(f"{path}: negative label or non-finite feature", line)
    if len(labels) == 0:
        raise ParseError(f"{path}: no data rows", 1)
    return Dataset.clean(feats, labels, num_classes)


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".noise")


def save_noise_sidecar(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("index,clean,noisy\n")
        for i, (c, y) in enumerate(zip(dataset.clean_labels, dataset.noisy_labels)):
            fh.write(f"{i},{int(c)},{int(y)}\n")


def load_noise_sidecar(dataset: Dataset, path) -> Dataset:
    """Apply the noisy labels stored in ``path``; clean labels must agree."""
    noisy = dataset.noisy_labels.copy()
    seen = np.zeros(len(dataset), dtype=bool)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["index", "clean", "noisy"]:
        raise ParseError(f"{path}: header must be index,clean,noisy", 1)
    for k, row in enumerate(rows[1:]):
        line = k + 2
        try:
            i, c, y = (int(v) for v in row)
        except ValueError:
            raise ParseError(f"{path}: expected three integers", line) from None
        if not 0 <= i < len(dataset) or dataset.clean_labels[i] != c:
            raise ParseError(f"{path}: row does not match dataset", line)
        noisy[i] = y
        seen[i] = True
    if not seen.all():
        raise ParseError(f"{path}: {int((~seen).sum())} samples missing")
    return dataset.with_noisy_labels(noisy)


def augment(x, jitter_std: float, rng: Rng) -> np.ndarray:
    """Gaussian-jittered view of ``x`` (vector or matrix)."""
    x = np.asarray(x, dtype=np.float64)
    if jitter_std < 0:
        raise ValueError("jitter_std must be >= 0")
    if jitter_std == 0:
        return x.copy()
    return x + rng.normal(0.0, jitter_std, size=x.shape)


def split_indices(labels, test_fraction: float, rng: Rng):
    """Stratified train/test indices (each sorted ascending)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    labels = np.asarray(labels)
    train, test = [], []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        n_test = int(round(test_fraction * len(members)))
        if n_test == 0 or n_test == len(members):
            raise ClassTooSmall(f"class {c} has {len(members)} samples; cannot split at {test_fraction}")
        perm = members[rng.permutation(len(members))]
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(dataset: Dataset, test_fraction: float, rng: Rng):
    """Stratified by clean label. Test labels are reset to clean."""
    tr, te = split_indices(dataset.clean_labels, test_fraction, rng)
    test = dataset.subset(te)
    return dataset.subset(tr), test.with_noisy_labels(test.clean_labels)


def standardize(train: Dataset, *others: Dataset):
    """Z-score every dataset with the training split's per-feature statistics."""
    mu = train.features.mean(axis=0)
    sd = train.features.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return tuple(replace(ds, features=(ds.features - mu) / sd) for ds in (train, *others))
