"""Command line: ``holotwin {generate,reconstruct,evaluate,sweep-z,verify}``.

Exit codes: 0 success, 1 verification failure, 2 usage error,
3 unknown method, 4 missing dataset, 5 config parse failure.
Worker processes default to the logical core count; override with
``HOLOTWIN_WORKERS``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .core import OpticalConfig
from .dataset import (
    DatasetError,
    export_png,
    generate_dataset,
    load_manifest,
    load_records,
    parse_noise_distribution,
)
from .metrics import (
    METRIC_NAMES,
    aggregate,
    default_workers,
    evaluate_method,
    write_aggregate_csv,
    write_per_sample_csv,
)
from .reconstruction import MethodError, parse_method, z_sweep
from .verify import run_checks

EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_METHOD = 3
EXIT_DATASET = 4
EXIT_CONFIG = 5

DEFAULT_OFFSETS = "-1e-3,-5e-4,0,5e-4,1e-3"
SWEEP_COLUMNS = ("method", "offset_m", "n") + tuple(f"{k}_mean" for k in METRIC_NAMES)


class ConfigParseError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigParseError("config must be a JSON object")
    return cfg


def _pick(flag, cfg: dict, key: str, default):
    return flag if flag is not None else cfg.get(key, default)


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigParseError(f"cannot parse offsets {text!r}") from None


def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    try:
        optics = OpticalConfig(**cfg.get("optics", {}))
        manifest = generate_dataset(
            args.out,
            count=int(_pick(args.count, cfg, "count", 200)),
            seed=int(_pick(args.seed, cfg, "seed", 0)),
            test_count=int(_pick(args.test_count, cfg, "test_count", 32)),
            noise_dist=parse_noise_distribution(_pick(args.noise_dist, cfg, "noise_dist", "uniform")),
            config=optics,
            noise_params=cfg.get("noise_params"),
            val_fraction=float(cfg.get("val_fraction", 0.2)),
            workers=args.workers or default_workers(),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(str(exc)) from None
    splits = manifest.splits
    print(
        f"wrote {manifest.sample_count} samples to {args.out} "
        f"(train {len(splits['train'])}, val {len(splits['val'])}, test {len(splits['test'])})"
    )
    return 0


def _records(args):
    return load_records(args.data, args.split, args.limit)


def cmd_reconstruct(args) -> int:
    method = parse_method(args.method)
    records = _records(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in records:
        field = method(np.asarray(r.hologram_norm, dtype=np.float64), r.config)
        stem = f"{r.index:06d}"
        (out / f"{stem}.f32").write_bytes(np.stack([field.real, field.imag], axis=-1).astype("<f4").tobytes())
        meta = {"index": r.index, "method": method.name, "shape": list(field.shape), "layout": "interleaved real/imag float32 LE"}
        (out / f"{stem}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        if not args.no_png:
            export_png(field, out / f"{stem}_amplitude.png", "amplitude")
            export_png(field, out / f"{stem}_phase.png", "phase")
    print(f"reconstructed {len(records)} samples with {method.name} into {out}")
    return 0


def cmd_evaluate(args) -> int:
    methods = [parse_method(m) for m in args.methods.split(",")]
    records = _records(args)
    workers = args.workers or default_workers()
    results = [evaluate_method(m, records, name=m.name, workers=workers) for m in methods]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_aggregate_csv(out / "metrics_aggregate.csv", results)
    write_per_sample_csv(out / "metrics_per_sample.csv", results)
    for r in results:
        print(
            f"{r.name:>10}  phase PSNR {r.mean['psnr_phase']:6.2f} dB  phase SSIM {r.mean['ssim_phase']:.4f}  "
            f"amp SSIM {r.mean['ssim_amp']:.4f}  B/S {r.mean['bs_ratio']:.4f}  {r.mean_time_ms:7.1f} ms"
        )
    return 0


def cmd_sweep_z(args) -> int:
    method = parse_method(args.method)
    offsets = _float_list(args.offsets)
    records = _records(args)
    per_offset = {off: [] for off in offsets}
    for r in records:
        h = np.asarray(r.hologram_norm, dtype=np.float64)
        for off, m in z_sweep(method, h, r.config, offsets, r.object_gt, r.support_mask):
            per_offset[off].append(m)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_z.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for off in offsets:
            mean, _ = aggregate(per_offset[off])
            w.writerow([method.name, repr(off), len(per_offset[off])] + [repr(mean[k]) for k in METRIC_NAMES])
            print(f"offset {off * 1e3:+.2f} mm  phase PSNR {mean['psnr_phase']:6.2f} dB")
    return 0


def cmd_verify(args) -> int:
    results = run_checks(args.seed)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holotwin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--test-count", type=int)
    g.add_argument("--noise-dist", help="'uniform' or tag:weight,...")
    g.add_argument("--config", help="JSON file; flags override its values")
    g.add_argument("--workers", type=int)
    g.set_defaults(func=cmd_generate)

    def data_args(sp):
        sp.add_argument("--data", required=True, help="dataset directory")
        sp.add_argument("--out", required=True)
        sp.add_argument("--split", default="test", help="train, val, test or all")
        sp.add_argument("--limit", type=int)
        sp.add_argument("--config", help="JSON file (reserved for shared settings)")

    r = sub.add_parser("reconstruct", help="reconstruct samples with one method")
    data_args(r)
    r.add_argument("--method", default="dirty", help="dirty, gs:ITERS or grad:STEPS")
    r.add_argument("--no-png", action="store_true")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("evaluate", help="score methods, write metrics CSVs")
    data_args(e)
    e.add_argument("--methods", default="dirty,gs:50,gs:100")
    e.add_argument("--workers", type=int)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep-z", help="metrics versus propagation distance error")
    data_args(s)
    s.add_argument("--method", default="dirty")
    s.add_argument("--offsets", default=DEFAULT_OFFSETS, help="comma-separated meters")
    s.set_defaults(func=cmd_sweep_z)

    v = sub.add_parser("verify", help="run the built-in invariant checks")
    v.add_argument("--seed", type=int, default=2024)
    v.set_defaults(func=cmd_verify)
    return p


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "--offsets -1e-3,..." as two flags
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--offsets" and i + 1 < len(argv):
            out.append(f"--offsets={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "config", None) and args.command != "generate":
            _load_config(args.config)
        if getattr(args, "data", None):
            load_manifest(args.data)
        return args.func(args)
    except MethodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_METHOD
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
