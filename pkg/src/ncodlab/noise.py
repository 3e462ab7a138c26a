"""Synthetic label corruption with a recorded ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import BadPairMap, SingleClass
from .numerics import Rng


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "symmetric"  # "symmetric" | "asymmetric"
    rate: float = 0.0
    pair_map: Mapping[int, int] | None = None
    exact_count: bool = False

    def __post_init__(self):
        if self.kind not in ("symmetric", "asymmetric"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"noise rate must be in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class NoiseReport:
    """``confusion[c, c2]`` counts samples observed as ``c`` whose clean label is ``c2``."""

    flip_mask: np.ndarray
    confusion: np.ndarray
    realized_rate: float


def cyclic_pair_map(num_classes: int) -> dict[int, int]:
    return {c: (c + 1) % num_classes for c in range(num_classes)}


def _report(clean: np.ndarray, noisy: np.ndarray, num_classes: int) -> NoiseReport:
    flip = noisy != clean
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (noisy, clean), 1)
    rate = float(flip.sum()) / len(clean) if len(clean) else 0.0
    return NoiseReport(flip, confusion, rate)


def _as_labels(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 0
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return labels, int(num_classes)


def _flip_draw(n: int, rate: float, rng: Rng, exact_count: bool) -> np.ndarray:
    if exact_count:
        chosen = np.zeros(n, dtype=bool)
        chosen[rng.permutation(n)[: int(round(rate * n))]] = True
        return chosen
    return rng.uniform(n) < rate


def inject_symmetric(labels, rate: float, rng: Rng, num_classes: int | None = None,
                     exact_count: bool = False):
    """Flip each label with probability ``rate`` to a uniformly chosen *other* class."""
    clean, C = _as_labels(labels, num_classes)
    if C < 2:
        raise SingleClass("symmetric noise needs at least two classes")
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"rate must be in [0, 1), got {rate}")
    flip = _flip_draw(len(clean), rate, rng, exact_count)
    offsets = rng.integers(1, C, size=len(clean))
    noisy = np.where(flip, (clean + offsets) % C, clean)
    return noisy, _report(clean, noisy, C)


def validate_pair_map(pair_map, num_classes: int) -> dict[int, int]:
    if not pair_map:
        raise BadPairMap("asymmetric noise needs a non-empty pair map")
    out = {}
    for src, dst in dict(pair_map).items():
        src, dst = int(src), int(dst)
        if not (0 <= src < num_classes and 0 <= dst < num_classes):
            raise BadPairMap(f"pair {src}->{dst} outside [0, {num_classes})")
        if src == dst:
            raise BadPairMap(f"class {src} mapped to itself")
        out[src] = dst
    return out


def inject_asymmetric(labels, rate: float, pair_map, rng: Rng, num_classes: int | None = None,
                      exact_count: bool = False):
    """Flip labels of mapped classes to their partner with probability ``rate``.

    ``pair_map=None`` selects the cyclic default ``c -> (c+1) mod C``.
    """
    clean, C = _as_labels(labels, num_classes)
    if C < 2:
        raise SingleClass("asymmetric noise needs at least two classes")
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"rate must be in [0, 1), got {rate}")
    pairs = validate_pair_map(cyclic_pair_map(C) if pair_map is None else pair_map, C)
    target = np.arange(C)
    mapped = np.zeros(C, dtype=bool)
    for src, dst in pairs.items():
        target[src] = dst
        mapped[src] = True
    flip = _flip_draw(len(clean), rate, rng, exact_count) & mapped[clean]
    noisy = np.where(flip, target[clean], clean)
    return noisy, _report(clean, noisy, C)


def inject(labels, spec: NoiseSpec, rng: Rng, num_classes: int | None = None):
    if spec.kind == "symmetric":
        return inject_symmetric(labels, spec.rate, rng, num_classes, spec.exact_count)
    return inject_asymmetric(labels, spec.rate, spec.pair_map, rng, num_classes, spec.exact_count)


def check_learnability(report: NoiseReport) -> bool:
    """True iff every observed class is dominated by its correctly labeled subset."""
    conf = report.confusion
    for c in range(conf.shape[0]):
        row = conf[c]
        if row.sum() == 0:
            continue
        if np.any(np.delete(row, c) > row[c]):
            return False
    return True
