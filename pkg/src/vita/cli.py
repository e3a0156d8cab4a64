"""Command-line front end: ``gen-data``, ``train``, ``infer`` and ``eval``.

Exit codes are a stable contract: 0 success, 2 configuration or usage error,
3 I/O or file-format error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, dump_config, load_config, scene_params, train_config
from .dense_maps import DenseMapError, save_dmap
from .evaluation import CorruptionSpec, evaluate_dataset, format_table
from .model import CheckpointError, infer, load_checkpoint, save_checkpoint
from .rasters import RasterFormatError, read_ppm, write_pgm
from .scenes import generate_dataset, load_dataset, write_dataset
from .training import LOSS_COLUMNS, NonFiniteLossError, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


def _echo_config(cfg: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_config(cfg))


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    base = scene_params(cfg)
    scenes = generate_dataset(args.count, base)
    out = Path(args.out)
    write_dataset(scenes, out)
    _echo_config(cfg, out / "config.json")
    print(f"wrote {len(scenes)} {base.preset} scenes to {out}")
    return EXIT_OK


def _format_log(history: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("epoch",) + LOSS_COLUMNS)
    for epoch, row in enumerate(history, start=1):
        writer.writerow([epoch] + [repr(float(row[c])) for c in LOSS_COLUMNS])
    return buf.getvalue()


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    tcfg = train_config(cfg)
    scenes = load_dataset(args.data)
    if not scenes:
        raise UsageError(f"dataset {args.data} is empty")
    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_suffix(".csv")
    history: list[dict] = []
    try:
        bank = train(scenes, tcfg, history=history)
    finally:
        if history:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            log_path.write_text(_format_log(history))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(bank, out)
    _echo_config(cfg, out.with_suffix(".config.json"))
    last = history[-1]
    print(f"trained {tcfg.epochs} epochs on {len(scenes)} scenes, final total loss {last['total']:.6f}")
    print(f"checkpoint {out}, log {log_path}")
    return EXIT_OK


def cmd_infer(args) -> int:
    if not (args.score_out or args.depth_out or args.all_maps):
        raise UsageError("nothing to write: pass --score-out, --depth-out or --all-maps")
    cfg = load_config(args.config)
    bank = load_checkpoint(args.ckpt)
    image = read_ppm(args.image)
    unc = cfg["uncertainty"]
    result = infer(bank, image, unc["alpha"], unc["epsilon"])
    maps = result.maps()
    if not all(np.all(np.isfinite(m)) for m in maps.values()):
        raise FloatingPointError("inference produced non-finite values")
    written = []
    if args.all_maps:
        d = Path(args.all_maps)
        d.mkdir(parents=True, exist_ok=True)
        for name, m in maps.items():
            save_dmap(m, d / f"{name}.dmap")
            written.append(d / f"{name}.dmap")
        write_pgm(result.score, d / "T.pgm")
        written.append(d / "T.pgm")
    if args.score_out:
        p = Path(args.score_out)
        p.parent.mkdir(parents=True, exist_ok=True)
        save_dmap(result.score, p)
        write_pgm(result.score, p.with_suffix(".pgm"))
        written += [p, p.with_suffix(".pgm")]
    if args.depth_out:
        p = Path(args.depth_out)
        p.parent.mkdir(parents=True, exist_ok=True)
        save_dmap(result.depth, p)
        written.append(p)
    for p in written:
        print(p)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    ev = cfg["eval"]
    tau = ev["tau"] if args.tau is None else args.tau
    if not 0.0 < tau < 1.0:
        raise UsageError(f"--tau must lie in (0, 1), got {tau}")
    try:
        corruption = CorruptionSpec.parse(args.corrupt) if args.corrupt else None
    except ValueError as exc:
        raise UsageError(f"--corrupt: {exc}") from None
    bank = load_checkpoint(args.ckpt)
    scenes = load_dataset(args.data)
    if not scenes:
        raise UsageError(f"dataset {args.data} is empty")
    unc = cfg["uncertainty"]
    report = evaluate_dataset(
        bank,
        scenes,
        tau=tau,
        corruption=corruption,
        seed=ev["corruption_seed"],
        aggregation=ev["aggregation"],
        output=ev["output"],
        alpha=unc["alpha"],
        epsilon=unc["epsilon"],
    )
    out = Path(args.report)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    table = format_table(report)
    out.with_suffix(".txt").write_text(table)
    _echo_config(cfg, out.with_suffix(".config.json"))
    sys.stdout.write(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vita", description="Uncertainty-aware traversability toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch losses")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="render synthetic scenes")
    p.add_argument("--config", help="JSON run config (defaults when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a token bank")
    p.add_argument("--config")
    p.add_argument("--data", required=True, help="dataset directory from gen-data")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="per-epoch CSV loss log (default: checkpoint path with .csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="predict maps for one PPM image")
    p.add_argument("--config")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--score-out", help="T as .dmap, plus a PGM beside it")
    p.add_argument("--depth-out", help="predicted relative depth as .dmap")
    p.add_argument("--all-maps", metavar="DIR", help="write P, C, p_var, R_slope, R_elev, T and T.pgm")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="threshold and score a dataset")
    p.add_argument("--config")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--tau", type=float, default=None, help="decision threshold (default 0.5)")
    p.add_argument("--corrupt", metavar="KIND:SEVERITY")
    p.add_argument("--report", required=True, help="JSON report path; a .txt table is written beside it")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, DenseMapError, RasterFormatError, CheckpointError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
