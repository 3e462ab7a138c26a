"""Command-line entry point: ``ncodlab {synth,inject,run}``.

Exit codes: 0 success, 1 runtime / IO / config error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import SynthSpec, load_csv, save_csv, save_noise_sidecar, sidecar_path, synth_clusters
from .errors import NcodLabError
from .experiment import load_config, run_experiment
from .noise import NoiseSpec, cyclic_pair_map, inject
from .numerics import Rng


def _parse_pairs(text: str) -> dict[int, int]:
    try:
        return {int(a): int(b) for a, b in (p.split(":") for p in text.split(",") if p)}
    except ValueError:
        raise argparse.ArgumentTypeError(f"pairs must look like '0:1,2:3', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncodlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic Gaussian-cluster dataset as CSV")
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--per-class", type=int, required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--sep", type=float, required=True, help="distance between cluster centers")
    s.add_argument("--spread", type=float, required=True, help="within-class standard deviation")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    i = sub.add_parser("inject", help="corrupt a CSV dataset's labels into a .noise sidecar")
    i.add_argument("dataset")
    i.add_argument("--rate", type=float, required=True)
    i.add_argument("--kind", choices=("symmetric", "asymmetric"), default="symmetric")
    i.add_argument("--pairs", type=_parse_pairs, default=None,
                   help="asymmetric class pairs 'src:dst,...' (default: c -> c+1 mod C)")
    i.add_argument("--exact-count", action="store_true", help="flip exactly round(rate*n) samples")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", default=None, help="sidecar path (default: <dataset stem>.noise)")

    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("config")
    r.add_argument("--out-dir", default=None, help="override the config's output directory")
    return p


def cmd_synth(args) -> int:
    try:
        spec = SynthSpec(args.classes, args.per_class, args.dim, args.sep, args.spread, args.seed)
    except ValueError as exc:
        print(f"ncodlab synth: {exc}", file=sys.stderr)
        return 2
    data = synth_clusters(spec)
    save_csv(data, args.out)
    print(f"wrote {len(data)} rows ({spec.num_classes} classes, d={spec.dim}) to {args.out}")
    return 0


def cmd_inject(args) -> int:
    data = load_csv(args.dataset)
    if args.kind == "symmetric" and args.pairs:
        print("ncodlab inject: --pairs only applies to --kind asymmetric", file=sys.stderr)
        return 2
    try:
        spec = NoiseSpec(args.kind, args.rate, args.pairs, args.exact_count)
    except ValueError as exc:
        print(f"ncodlab inject: {exc}", file=sys.stderr)
        return 2
    noisy, report = inject(data.clean_labels, spec, Rng(args.seed), data.num_classes)
    out = Path(args.out) if args.out else sidecar_path(args.dataset)
    save_noise_sidecar(data.with_noisy_labels(noisy), out)
    if args.kind == "asymmetric" and args.pairs is None:
        pairs = cyclic_pair_map(data.num_classes)
        print("no --pairs given; using cyclic default " + ",".join(f"{a}:{b}" for a, b in pairs.items()))
    print(f"realized_rate={report.realized_rate:.6f} flipped={int(report.flip_mask.sum())} n={len(noisy)} -> {out}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg, args.out_dir)
    s = result.summary
    auc = "n/a" if s["u_auc"] is None else f"{s['u_auc']:.4f}"
    print(f"mode={s['mode']} epochs={len(result.report)} test_accuracy={s['test_accuracy']:.4f} "
          f"u_auc={auc} traces={result.output_dir}")
    return 0


COMMANDS = {"synth": cmd_synth, "inject": cmd_inject, "run": cmd_run}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (NcodLabError, ValueError, OSError) as exc:
        print(f"ncodlab {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
