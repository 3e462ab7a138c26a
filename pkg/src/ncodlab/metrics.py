"""Per-epoch diagnostics and their CSV / JSON-lines serialization.

Trace columns, in order (``FIELDS``):

``epoch``                  0-based epoch index
``l1``, ``l2``             batch-averaged discounted CE and u-fitting loss
``l_c``, ``l_b``           consistency and class-balance KL terms
``total``                  ``l1 + l2 + lambda_c*l_c + lambda_b*l_b``
``train_accuracy``         argmax agreement with the (noisy) training labels
``test_accuracy``          argmax agreement with clean test labels
``mean_similarity_clean``  mean cosine to the labeled centroid, unflipped samples
``mean_similarity_noisy``  same, flipped samples
``mean_u_clean``           mean u over unflipped samples (end of epoch)
``mean_u_noisy``           mean u over flipped samples
``u_auc``                  detection AUC of u against the flip mask
``keep_fraction_used``     share of each class used for its centroid

Group statistics are empty (CSV) / null (JSON) when a group has no members.
Reals are written with 17 significant digits so a parse returns the exact value.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import EmptyGroup, OneClassOnly


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    l1: float
    l2: float
    l_c: float
    l_b: float
    total: float
    train_accuracy: float
    test_accuracy: float
    mean_similarity_clean: float | None
    mean_similarity_noisy: float | None
    mean_u_clean: float | None
    mean_u_noisy: float | None
    u_auc: float | None
    keep_fraction_used: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), allow_nan=False)


FIELDS = tuple(f.name for f in fields(EpochRecord))


def group_mean(values, mask):
    """``(mean over mask, mean over ~mask)``."""
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if values.shape != mask.shape or values.size == 0:
        raise EmptyGroup("values and mask must be non-empty and equally sized")
    k = int(mask.sum())
    if k == 0 or k == mask.size:
        raise EmptyGroup("one of the groups is empty")
    return float(values[mask].mean()), float(values[~mask].mean())


def detection_auc(scores, positives) -> float:
    """Mann-Whitney AUC: P(score of random positive > random negative), ties count 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positives, dtype=bool)
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("AUC needs both positive and negative samples")
    # midranks: tied scores share the average of the ranks they span
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    midrank = upper - (counts - 1) / 2.0
    ranks = midrank[inverse]
    u_stat = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def emit_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(FIELDS) + "\n")
        for rec in records:
            fh.write(",".join(_cell(getattr(rec, f)) for f in FIELDS) + "\n")


def read_csv(path) -> list[EpochRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            vals = {}
            for f in FIELDS:
                raw = row[f]
                if f == "epoch":
                    vals[f] = int(raw)
                else:
                    vals[f] = None if raw == "" else float(raw)
            out.append(EpochRecord(**vals))
    return out


def read_jsonl(path) -> list[EpochRecord]:
    with open(path, encoding="utf-8") as fh:
        return [EpochRecord(**json.loads(line)) for line in fh if line.strip()]
