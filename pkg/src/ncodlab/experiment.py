"""Experiment configuration files and the end-to-end pipeline behind ``ncodlab run``.

A config is a TOML file; ``configs/ncod_sym40.toml`` in the repository is a
complete annotated example. Pipeline order:

1. build the dataset (synthetic clusters or CSV), optionally applying a noise
   sidecar to all rows;
2. stratified train/test split (test labels reset to clean);
3. inject noise into the training split only (unless a sidecar was used);
4. standardize with training statistics;
5. train, streaming JSON lines, then write the CSV trace and checkpoint.

Random streams: ``Rng(seed, "data")``, ``"split"``, ``"noise"``, and the
training streams documented in :mod:`ncodlab.trainer`.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .centroids import ClassEmbeddings
from .data import (Dataset, SynthSpec, load_csv, load_noise_sidecar, sidecar_path, split,
                   standardize, synth_clusters)
from .errors import ConfigInvalid
from .metrics import emit_csv
from .model import forward, save_checkpoint, write_flat_record
from .ncod_loss import class_balance_reg
from .noise import NoiseReport, NoiseSpec, inject
from .numerics import Rng
from .trainer import TrainConfig, TrainReport, train

OUTPUT_DIR_ENV = "NCODLAB_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "runs"

_SYNTH_KEYS = {"num_classes", "per_class", "dim", "separation", "spread"}


@dataclass
class ExperimentConfig:
    seed: int = 0
    dataset: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    output: dict = field(default_factory=dict)
    train_explicit: frozenset = frozenset()
    base_dir: Path = Path(".")


@dataclass
class ExperimentResult:
    report: TrainReport
    noise_report: NoiseReport | None
    output_dir: Path
    summary: dict


def _require(block: dict, key: str, kind, where: str):
    if key not in block:
        raise ConfigInvalid(f"{where}.{key}", "missing")
    val = block[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ConfigInvalid(f"{where}.{key}", f"expected {kind.__name__}, got {val!r}")
    return val


def parse_config(text: str, base_dir: Path | str = ".") -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid("config", f"TOML syntax error: {exc}") from None
    unknown = set(raw) - {"seed", "dataset", "noise", "train", "output"}
    if unknown:
        raise ConfigInvalid(sorted(unknown)[0], "unknown top-level key")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigInvalid("seed", f"expected integer, got {seed!r}")

    ds = dict(raw.get("dataset", {}))
    source = ds.get("source", "synth")
    if source == "synth":
        if "path" in ds:
            raise ConfigInvalid("dataset.path", "give either source = 'synth' or a csv path, not both")
        for key in _SYNTH_KEYS - {"separation", "spread"}:
            _require(ds, key, int, "dataset")
        for key in ("separation", "spread"):
            _require(ds, key, float, "dataset")
    elif source == "csv":
        _require(ds, "path", str, "dataset")
        extra = _SYNTH_KEYS & set(ds)
        if extra:
            raise ConfigInvalid(f"dataset.{sorted(extra)[0]}", "synthetic key given for a csv dataset")
    else:
        raise ConfigInvalid("dataset.source", f"must be 'synth' or 'csv', got {source!r}")
    ds["source"] = source
    tf = ds.setdefault("test_fraction", 0.2)
    if not isinstance(tf, (int, float)) or not 0 < tf < 1:
        raise ConfigInvalid("dataset.test_fraction", f"must be in (0, 1), got {tf!r}")

    noise = dict(raw.get("noise", {}))
    kind = noise.setdefault("kind", "none")
    if kind not in ("none", "symmetric", "asymmetric", "sidecar"):
        raise ConfigInvalid("noise.kind", f"unknown kind {kind!r}")
    if kind in ("symmetric", "asymmetric"):
        rate = _require(noise, "rate", float, "noise")
        try:
            NoiseSpec(kind, rate)
        except ValueError as exc:
            raise ConfigInvalid("noise.rate", str(exc)) from None
    if kind == "sidecar" and source != "csv":
        raise ConfigInvalid("noise.kind", "sidecar noise needs a csv dataset")
    if "pairs" in noise and kind != "asymmetric":
        raise ConfigInvalid("noise.pairs", "pairs only apply to asymmetric noise")

    tblock = dict(raw.get("train", {}))
    known = {f.name for f in fields(TrainConfig)}
    for key in tblock:
        if key not in known:
            raise ConfigInvalid(f"train.{key}", "unknown key")
    tblock.setdefault("seed", seed)
    try:
        tcfg = TrainConfig(**tblock)
    except ConfigInvalid as exc:
        raise ConfigInvalid(f"train.{exc.field}", str(exc).split(": ", 1)[-1]) from None
    except TypeError as exc:
        raise ConfigInvalid("train", str(exc)) from None

    out = dict(raw.get("output", {}))
    return ExperimentConfig(seed, ds, noise, tcfg, out, frozenset(tblock), Path(base_dir))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def output_dir(cfg: ExperimentConfig) -> Path:
    if "dir" in cfg.output:
        return Path(cfg.output["dir"])
    return Path(os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))


def build_datasets(cfg: ExperimentConfig):
    """Return ``(train, test, noise_report, raw_spread_scale)``; features standardized."""
    ds_cfg = cfg.dataset
    seed = cfg.seed
    spread = None
    if ds_cfg["source"] == "synth":
        spec = SynthSpec(ds_cfg["num_classes"], ds_cfg["per_class"], ds_cfg["dim"],
                         ds_cfg["separation"], ds_cfg["spread"], seed)
        data: Dataset = synth_clusters(spec, Rng(seed, "data"))
        spread = spec.spread
    else:
        path = Path(ds_cfg["path"])
        if not path.is_absolute():
            path = cfg.base_dir / path
        data = load_csv(path, ds_cfg.get("num_classes"))
        if cfg.noise["kind"] == "sidecar":
            side = Path(cfg.noise.get("path", sidecar_path(path)))
            data = load_noise_sidecar(data, side if side.is_absolute() or side.exists() else cfg.base_dir / side)

    train_set, test_set = split(data, ds_cfg["test_fraction"], Rng(seed, "split"))

    report = None
    kind = cfg.noise["kind"]
    if kind in ("symmetric", "asymmetric"):
        pairs = cfg.noise.get("pairs")
        spec = NoiseSpec(kind, cfg.noise["rate"], None if pairs is None else {int(a): int(b) for a, b in pairs},
                         bool(cfg.noise.get("exact_count", False)))
        noisy, report = inject(train_set.clean_labels, spec, Rng(seed, "noise"), data.num_classes)
        train_set = train_set.with_noisy_labels(noisy)

    scale = 1.0
    if ds_cfg.get("standardize", True):
        scale = float(np.mean(train_set.features.std(axis=0))) or 1.0
        train_set, test_set = standardize(train_set, test_set)
    return train_set, test_set, report, (None if spread is None else spread / scale)


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None) -> ExperimentResult:
    out_dir = Path(out_dir) if out_dir is not None else output_dir(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set, test_set, noise_report, spread = build_datasets(cfg)

    tcfg = cfg.train
    if "jitter_std" not in cfg.train_explicit and spread is not None:
        tcfg = replace(tcfg, jitter_std=0.5 * spread)

    o = cfg.output
    jsonl_path = out_dir / o.get("jsonl", "trace.jsonl")
    csv_path = out_dir / o.get("csv", "trace.csv")
    u_fh = open(out_dir / o.get("u_trace", "u_trace.csv"), "w", encoding="utf-8") if o.get("dump_u") else None
    cent_fh = open(out_dir / o.get("centroid_trace", "centroids.bin"), "wb") if o.get("dump_centroids") else None
    if u_fh:
        u_fh.write("epoch,index,u,flipped\n")

    def observer(epoch, model, ustore, cents: ClassEmbeddings, record):
        if u_fh:
            for i, (ui, f) in enumerate(zip(ustore.u, train_set.flip_mask)):
                u_fh.write(f"{epoch},{i},{format(float(ui), '.17g')},{int(f)}\n")
        if cent_fh:  # same record layout as checkpoints, dims = (C, embedding_dim)
            write_flat_record(cent_fh, cents.vectors.shape, cents.vectors.ravel())

    try:
        with open(jsonl_path, "w", encoding="utf-8") as sink:
            model, ustore, report = train(train_set, test_set, tcfg, sink=sink, observer=observer)
    finally:
        if u_fh:
            u_fh.close()
        if cent_fh:
            cent_fh.close()
    emit_csv(report.records, csv_path)
    if o.get("checkpoint", "model.bin"):
        save_checkpoint(model, out_dir / o.get("checkpoint", "model.bin"))

    final = report.final
    summary = {
        "mode": tcfg.mode,
        "test_accuracy": final.test_accuracy,
        "u_auc": final.u_auc,
        "class_balance": class_balance_reg(forward(model, test_set.features)[1]),
        "realized_noise_rate": None if noise_report is None else noise_report.realized_rate,
    }
    return ExperimentResult(report, noise_report, out_dir, summary)
