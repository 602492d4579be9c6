"""Command-line entry points.

Every subcommand reads a JSON experiment config, writes one JSON report to
stdout (or --out), and exits nonzero with a machine-readable error object on
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import SpnnError
from .harness import (
    AttackSetup,
    bandwidth_sweep,
    gen_synth,
    leakage_attack,
    run_experiment,
    scale_sweep,
)
from .protocol import TrainConfig

_BANDWIDTH_SUFFIX = {"k": 1e3, "m": 1e6, "g": 1e9}


def parse_bandwidth(text: str) -> float:
    text = text.strip().lower().removesuffix("bps")
    if text and text[-1] in _BANDWIDTH_SUFFIX:
        return float(text[:-1]) * _BANDWIDTH_SUFFIX[text[-1]]
    return float(text)


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=float)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _cmd_train(args) -> int:
    _emit(run_experiment(_load_config(args.config)), args.out)
    return 0


def _cmd_sweep_bandwidth(args) -> int:
    bandwidths = [parse_bandwidth(b) for b in args.bandwidths.split(",")]
    _emit(bandwidth_sweep(_load_config(args.config), bandwidths), args.out)
    return 0


def _cmd_sweep_scale(args) -> int:
    fractions = [float(f) for f in args.fractions.split(",")]
    _emit(scale_sweep(_load_config(args.config), fractions), args.out)
    return 0


def _cmd_attack(args) -> int:
    config = _load_config(args.config)
    from .harness import _dataset_from_spec

    ds, d_a = _dataset_from_spec(config["dataset"])
    train = dict(config["train"])
    train["d_a"], train["d_b"] = d_a, ds.d - d_a
    train["optimizer"] = args.optimizer
    if args.optimizer == "sgld":
        train.setdefault("sgld_scope", "all")
    attack_spec = dict(config.get("attack", {}))
    if args.property:
        attack_spec["property_column"] = args.property
    setup = AttackSetup(**attack_spec)
    cfg = TrainConfig(**train)
    _emit(leakage_attack(ds, cfg, setup, d_a=d_a), args.out)
    return 0


def _cmd_gen_synth(args) -> int:
    ds = gen_synth(args.rows, args.features_a, args.features_b, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def write_csv(path, columns, matrix, labels=None):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = (["label"] if labels is not None else []) + columns
            writer.writerow(header)
            for i in range(len(matrix)):
                row = ([int(labels[i])] if labels is not None else [])
                writer.writerow(row + [f"{v:.10g}" for v in matrix[i]])

    d_a = args.features_a
    write_csv(out_dir / "full.csv", ds.columns, ds.features, ds.labels)
    write_csv(out_dir / "part_a.csv", ds.columns[:d_a], ds.features[:, :d_a], ds.labels)
    write_csv(out_dir / "part_b.csv", ds.columns[d_a:], ds.features[:, d_a:])
    meta = {"rows": ds.n, "features_a": d_a, "features_b": ds.d - d_a,
            "seed": args.seed, "label_column": "label", "property_column": "amount"}
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    _emit(meta, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spnn",
        description="Privacy-preserving training of vertically partitioned "
                    "neural networks over secret sharing or Paillier encryption.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train the split model plus the plaintext baseline")
    train.add_argument("--config", required=True)
    train.add_argument("--out")
    train.set_defaults(fn=_cmd_train)

    bw = sub.add_parser("sweep-bandwidth", help="epoch time of both backends across bandwidths")
    bw.add_argument("--config", required=True)
    bw.add_argument("--bandwidths", default="100K,1M,10M,100M",
                    help="comma-separated, with K/M/G suffixes")
    bw.add_argument("--out")
    bw.set_defaults(fn=_cmd_sweep_bandwidth)

    sc = sub.add_parser("sweep-scale", help="epoch time against training-set fraction")
    sc.add_argument("--config", required=True)
    sc.add_argument("--fractions", default="0.2,0.4,0.6,0.8,1.0")
    sc.add_argument("--out")
    sc.set_defaults(fn=_cmd_sweep_scale)

    atk = sub.add_parser("attack", help="shadow-training property-inference evaluation")
    atk.add_argument("--config", required=True)
    atk.add_argument("--optimizer", choices=("sgd", "sgld"), default="sgd")
    atk.add_argument("--property", help="feature column to attack (median-binarized)")
    atk.add_argument("--out")
    atk.set_defaults(fn=_cmd_attack)

    gen = sub.add_parser("gen-synth", help="write the synthetic planted-property dataset")
    gen.add_argument("--rows", type=int, required=True)
    gen.add_argument("--features-a", type=int, required=True)
    gen.add_argument("--features-b", type=int, required=True)
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--seed", type=int, default=1)
    gen.set_defaults(fn=_cmd_gen_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SpnnError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}},
                  sys.stdout)
        print()
        return 1


if __name__ == "__main__":
    sys.exit(main())
