"""Command-line entry point: ``seqloc <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import checkpoint, gradcheck
from .synthdata import DataConfig, Dataset, generate_dataset, indoor_config, urban_config
from .trainer import TrainConfig, compare_fov, evaluate, sweep_T, train, write_eval_outputs

PRESETS = {"default": DataConfig, "urban": urban_config, "indoor": indoor_config}


def _data_config(preset: str, overrides: dict) -> DataConfig:
    return DataConfig.from_dict({**asdict(PRESETS[preset]()), **overrides})


def _read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def parse_t_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"T values must be positive integers, got {text!r}")
    return values


def cmd_gen(args) -> int:
    cfg = _data_config(args.preset, _read_json(args.config) if args.config else {})
    ds = generate_dataset(cfg, out_dir=args.out)
    print(f"wrote {ds.n_frames} frames to {args.out}")
    return 0


def cmd_train(args) -> int:
    ds = Dataset.load(args.data)
    cfg = TrainConfig.from_json(args.config)
    result = train(cfg, ds, log_path=args.log)
    result.save_checkpoint(args.out)
    print(f"beta={result.beta:.6g} steps={len(result.log_rows)} checkpoint={args.out}")
    return 0


def cmd_eval(args) -> int:
    ds = Dataset.load(args.data)
    params, options, _ = checkpoint.load(args.ckpt)
    report = evaluate(params, ds, args.split, options)
    write_eval_outputs(report, args.out_dir)
    print(json.dumps(report.summary()))
    return 0


def cmd_sweep_t(args) -> int:
    spec = _read_json(args.data_spec)
    unknown = set(spec) - {"preset", "data", "train"}
    if unknown:
        raise ValueError(f"unknown data-spec keys: {sorted(unknown)}")
    dcfg = _data_config(spec.get("preset", "urban"), spec.get("data", {}))
    tcfg = TrainConfig.from_dict({"epochs": 50, **spec.get("train", {})})
    ds = generate_dataset(dcfg)
    rows = sweep_T(tcfg, ds, args.t, out_csv=args.out)
    for r in rows:
        print(f"T={r['T']}: {r['median_position_m']:.3f} m {r['median_orientation_deg']:.2f} deg")
    return 0


def cmd_compare_fov(args) -> int:
    tcfg = TrainConfig.from_json(args.config) if args.config else TrainConfig(epochs=1)
    tcfg = tcfg.replace(max_steps=args.steps)
    dcfg = urban_config(seed=args.scene_seed)
    rows = compare_fov(tcfg, dcfg, out_csv=args.out)
    for r in rows:
        print(f"{r['optic']:<16} {r['variant']:<15} {r['median_position_m']:.3f} m "
              f"{r['median_orientation_deg']:.2f} deg")
    return 0


def cmd_gradcheck(args) -> int:
    return gradcheck.main(args.trials, args.seed)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqloc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="render a synthetic dataset")
    g.add_argument("--config", help="JSON of DataConfig overrides")
    g.add_argument("--preset", choices=sorted(PRESETS), default="default")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--config", required=True, help="JSON with TrainConfig fields")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="train_log.csv path")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--split", choices=("train", "test"), default="test")
    e.add_argument("--out-dir", required=True)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep-t", help="train and evaluate one model per window length")
    s.add_argument("--data-spec", required=True,
                   help='JSON {"preset": ..., "data": {...}, "train": {...}}')
    s.add_argument("--t", type=parse_t_list, default=[2, 3, 4, 5, 10])
    s.add_argument("--out", default="sweep_t.csv")
    s.set_defaults(func=cmd_sweep_t)

    c = sub.add_parser("compare-fov", help="Perspective-90 / Fisheye-130 / Fisheye-180 table")
    c.add_argument("--scene-seed", type=int, required=True)
    c.add_argument("--config", help="JSON with TrainConfig fields")
    c.add_argument("--steps", type=int, default=1000, help="Adam steps per variant")
    c.add_argument("--out", default="fov_table.csv")
    c.set_defaults(func=cmd_compare_fov)

    k = sub.add_parser("gradcheck", help="finite-difference check of BPTT and loss gradients")
    k.add_argument("--trials", type=int, default=20)
    k.add_argument("--seed", type=int, default=0)
    k.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
