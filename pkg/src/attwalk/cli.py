"""Command-line interface: gen-data, train, eval, inspect-walks, attention-stats.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import traceback
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import attentiveness_row, rows_csv, summarize
from .checkpoint import META, TENSORS, Checkpoint
from .config import ConfigError, format_config, load_config
from .dataset import MANIFEST, generate_dataset, load_split
from .errors import AttWalkError, EmptyDataset, InvalidCheckpoint
from .metrics import classification_report, ranked_lists_csv, retrieval_report, MetricsReport
from .mesh import load_mesh, normalize_unit_cube
from .overlay import export_walk_overlay
from .trainer import (
    LogRow, Model, TrainConfig, embed, eval_rng, mesh_at_scale, predict_dataset, describe_dataset,
    train_phase1, train_phase2, train_single,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
LOG_FIELDS = ("step", "phase", "lr", "loss", "accuracy")
RUN_MANIFEST = "run_manifest.json"


class UsageError(Exception):
    """Bad arguments, configuration or inputs: exit code 2."""


# ---------------------------------------------------------------------------
# helpers

def blob_hash(data: bytes) -> str:
    """Git-style content hash of a file body."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def hash_inputs(paths: Sequence[Path], root: Optional[Path] = None) -> tuple[dict, str]:
    """Per-file hashes and one combined hash over (relative path, hash) pairs."""
    files = {}
    for p in sorted(paths):
        key = str(p.relative_to(root)) if root is not None else str(p)
        files[key] = blob_hash(p.read_bytes())
    combined = hashlib.sha256("".join(f"{k}\0{v}\n" for k, v in sorted(files.items())).encode()).hexdigest()
    return files, combined


def dataset_files(data_dir: Path) -> list[Path]:
    manifest = data_dir / MANIFEST
    if not manifest.is_file():
        raise UsageError(f"no {MANIFEST} in {data_dir}")
    with open(manifest, newline="") as fh:
        rels = [row["path"] for row in csv.DictReader(fh)]
    return [manifest] + [data_dir / r for r in rels]


def write_run_manifest(out: Path, command: str, args: argparse.Namespace, config: dict,
                       seed: int, inputs: Sequence[Path], outputs: Sequence[Path],
                       root: Optional[Path] = None) -> Path:
    files, combined = hash_inputs(list(inputs), root)
    manifest = {
        "command": command,
        "argv": {k: v for k, v in vars(args).items() if k != "func"},
        "config": config,
        "seed": seed,
        "input_hash": combined,
        "inputs": files,
        "outputs": sorted(str(p) for p in outputs),
        "version": __version__,
    }
    path = out / RUN_MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def write_log(path: Path, rows: Sequence[LogRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_FIELDS)
        for r in rows:
            w.writerow((r.step, r.phase, repr(r.lr), repr(r.loss), repr(r.accuracy)))


def ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"cannot write to {path}: {exc}") from None
    return path


def resolve_checkpoint(path: Path) -> Path:
    """A checkpoint directory, or a training output directory holding one."""
    if (path / META).is_file() and (path / TENSORS).is_file():
        return path
    for sub in ("phase2", "single", "phase1"):
        if (path / sub / META).is_file():
            return path / sub
    raise UsageError(f"no checkpoint found at {path}")


def load_checkpoint(path: Path) -> tuple[Path, Checkpoint]:
    d = resolve_checkpoint(path)
    try:
        return d, Checkpoint.load(d)
    except InvalidCheckpoint as exc:
        raise UsageError(str(exc)) from None


def set_threads() -> None:
    """Cap BLAS threads when ATTWALK_THREADS is set."""
    value = os.environ.get("ATTWALK_THREADS")
    if not value:
        return
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"ATTWALK_THREADS must be an integer, got {value!r}") from None
    if n < 1:
        raise UsageError("ATTWALK_THREADS must be >= 1")
    from threadpoolctl import threadpool_limits
    threadpool_limits(limits=n)


# ---------------------------------------------------------------------------
# commands

def cmd_gen_data(args) -> int:
    if args.per_class < 1:
        raise UsageError("--per-class must be at least 1")
    if any(r < 4 for r in args.resolutions):
        raise UsageError("--resolutions must be face counts >= 4")
    out = ensure_dir(Path(args.out))
    entries = generate_dataset(out, args.per_class, args.resolutions, args.seed)
    paths = [out / MANIFEST] + [out / e.path for e in entries]
    write_run_manifest(out, "gen-data", args, {"per_class": args.per_class,
                       "resolutions": list(args.resolutions)}, args.seed, [], paths)
    n_train = sum(e.split == "train" for e in entries)
    print(f"wrote {len(entries)} meshes ({n_train} train / {len(entries) - n_train} test) to {out}")
    return EXIT_OK


def train_config(args) -> TrainConfig:
    overrides = {
        "seed": args.seed,
        "phase1_steps": args.phase1_steps,
        "phase2_steps": args.phase2_steps,
        "walk_cache": args.walk_cache,
        "aggregator": args.aggregator,
    }
    if args.freeze_head:
        overrides["freeze_head"] = True
    if args.debug:
        overrides["debug"] = True
    cfg = load_config(args.config, overrides)
    if args.mode == "retrieve":
        cfg.loss_mode = "retrieval"
    elif cfg.loss_mode == "retrieval":
        cfg.loss_mode = "classification"
    cfg.validate()
    return cfg


def cmd_train(args) -> int:
    data = Path(args.data)
    inputs = dataset_files(data)
    try:
        cfg = train_config(args)
    except (ConfigError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from None
    out = ensure_dir(Path(args.out))
    phase1_dir = Path(args.ckpt) if args.ckpt else out / "phase1"
    prior = None
    if args.phase == "2":
        try:
            prior = Checkpoint.load(phase1_dir)
        except InvalidCheckpoint:
            raise UsageError(f"--phase 2 needs a phase-1 checkpoint at {phase1_dir}") from None
        if prior.phase not in ("1", "init"):
            raise UsageError(f"{phase1_dir} holds a phase-{prior.phase} checkpoint, not phase 1")
        inputs = inputs + [phase1_dir / TENSORS, phase1_dir / META]
    try:
        meshes = load_split(data, "train")
    except EmptyDataset as exc:
        raise UsageError(str(exc)) from None
    if not meshes:
        raise UsageError(f"no training meshes in {data}")

    rows: list[LogRow] = []
    outputs = []
    (out / "config.txt").write_text(format_config(cfg))
    try:
        if args.phase in ("1", "both"):
            prior = train_phase1(meshes, cfg, rows)
            outputs.append(prior.save(out / "phase1"))
        if args.phase in ("2", "both"):
            outputs.append(train_phase2(prior, meshes, cfg, rows).save(out / "phase2"))
        if args.phase == "single":
            outputs.append(train_single(meshes, cfg, rows).save(out / "single"))
    except FloatingPointError as exc:
        dump = out / "nan_dump.json"
        dump.write_text(json.dumps({
            "error": str(exc),
            "config": cfg.to_dict(),
            "last_log_rows": [vars(r) for r in rows[-20:]],
            "traceback": traceback.format_exc(),
        }, indent=2, default=str) + "\n")
        write_log(out / "train_log.csv", rows)
        print(f"error: numerical failure: {exc}; diagnostics in {dump}", file=sys.stderr)
        return EXIT_NUMERIC
    write_log(out / "train_log.csv", rows)
    outputs += [out / "train_log.csv", out / "config.txt"]
    write_run_manifest(out, "train", args, cfg.to_dict(), cfg.seed, inputs, outputs)
    last = rows[-1] if rows else None
    summary = f"; last loss {last.loss:.4f}, batch accuracy {last.accuracy:.3f}" if last else ""
    print(f"trained phase {args.phase} -> {', '.join(str(p) for p in outputs[:-2])}{summary}")
    return EXIT_OK


def evaluate(ckpt: Checkpoint, meshes, walks: int, scales, seed: int, mode: str,
             descriptor: str, aggregator: Optional[str] = None):
    """(MetricsReport, ranked lists or None) for one walk count."""
    model = Model.from_checkpoint(ckpt, aggregator)
    cache: dict = {}
    labels = np.array([m.label for m in meshes])
    if mode == "classify":
        scores = predict_dataset(meshes, model, scales, walks, seed, cache)
        return classification_report(np.argmax(scores, axis=1), labels), None
    desc = describe_dataset(meshes, model, scales, walks, seed, descriptor, cache)
    return retrieval_report(desc, labels, [m.sublabel for m in meshes])


def cmd_eval(args) -> int:
    data = Path(args.data)
    inputs = dataset_files(data)
    ckpt_dir, ckpt = load_checkpoint(Path(args.ckpt))
    mode = args.mode
    if mode == "auto":
        mode = "retrieve" if ckpt.config.get("loss_mode") == "retrieval" else "classify"
    scales = args.scales or tuple(ckpt.config.get("scales", (1000, 2000, 4000)))
    meshes = load_split(data, args.split)
    if not meshes:
        raise UsageError(f"no {args.split} meshes in {data}")
    out = ensure_dir(Path(args.out) if args.out else ckpt_dir / "eval")
    values, lists_text = {}, []
    for n in args.walks:
        report, lists = evaluate(ckpt, meshes, n, scales, args.seed, mode, args.descriptor, args.aggregator)
        prefix = f"walks={n}/" if len(args.walks) > 1 else ""
        values.update({prefix + k: v for k, v in report.values.items()})
        if lists is not None:
            lists_text.append((n, ranked_lists_csv(lists)))
    report = MetricsReport(values)
    outputs = [out / "metrics.csv", out / "metrics.txt"]
    outputs[0].write_text(report.to_csv())
    outputs[1].write_text(report.table() + "\n")
    for n, text in lists_text:
        name = "ranked_lists.csv" if len(lists_text) == 1 else f"ranked_lists_w{n}.csv"
        (out / name).write_text(text)
        outputs.append(out / name)
    config = {"mode": mode, "walks": list(args.walks), "scales": list(scales), "split": args.split,
              "descriptor": args.descriptor, "aggregator": args.aggregator or ckpt.aggregator}
    write_run_manifest(out, "eval", args, config, args.seed,
                       inputs + [ckpt_dir / TENSORS, ckpt_dir / META], outputs)
    print(report.table())
    return EXIT_OK


def _load_single_mesh(path: Path):
    try:
        return normalize_unit_cube(load_mesh(path))
    except (AttWalkError, IndexError, OSError, ValueError) as exc:
        raise UsageError(f"cannot load mesh {path}: {exc}") from None


def walk_table(mesh_id: str, contributions) -> list[tuple[str, int, float, int]]:
    """(mesh id, walk index, contribution, rank) rows; rank 1 is most attentive."""
    c = np.asarray(contributions, dtype=np.float64)
    order = sorted(range(len(c)), key=lambda j: (-c[j], j))
    rank = {j: r for r, j in enumerate(order, start=1)}
    return [(mesh_id, j, float(c[j]), rank[j]) for j in range(len(c))]


def cmd_inspect_walks(args) -> int:
    if args.walks < 1:
        raise UsageError("--walks must be at least 1")
    mesh_path = Path(args.mesh)
    mesh = _load_single_mesh(mesh_path)
    ckpt_dir, ckpt = load_checkpoint(Path(args.ckpt))
    model = Model.from_checkpoint(ckpt)
    if args.scale:
        mesh = mesh_at_scale(mesh, args.scale)
    _, logits, walks, contributions = embed(mesh, model, args.walks, eval_rng(args.seed, 0))
    if contributions is None:
        contributions = np.full(args.walks, 1.0 / args.walks)
    out = ensure_dir(Path(args.out))
    rows = walk_table(mesh_path.name, contributions)
    with open(out / "walks.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("mesh_id", "walk_index", "contribution", "rank"))
        for mesh_id, j, c, r in rows:
            w.writerow((mesh_id, j, repr(c), r))
    (out / "overlay.ply").write_bytes(export_walk_overlay(mesh, walks, contributions))
    outputs = [out / "walks.csv", out / "overlay.ply"]
    write_run_manifest(out, "inspect-walks", args, {"walks": args.walks, "scale": args.scale},
                       args.seed, [mesh_path, ckpt_dir / TENSORS, ckpt_dir / META], outputs)
    best = min(rows, key=lambda r: r[3])
    print(f"predicted class {int(np.argmax(logits))}; most attentive walk {best[1]} "
          f"(contribution {best[2]:.4f}); wrote {out / 'walks.csv'} and {out / 'overlay.ply'}")
    return EXIT_OK


def cmd_attention_stats(args) -> int:
    data = Path(args.data)
    inputs = dataset_files(data)
    ckpt_dir, ckpt = load_checkpoint(Path(args.ckpt))
    model = Model.from_checkpoint(ckpt, "attention")
    meshes = load_split(data, args.split)
    if not meshes:
        raise UsageError(f"no {args.split} meshes in {data}")
    if args.walks < 2:
        raise UsageError("--walks must be at least 2 to compare walks")
    rows = []
    for i, m in enumerate(meshes):
        _, _, walks, contributions = embed(m, model, args.walks, eval_rng(args.seed, i))
        rows.append(attentiveness_row(m, walks, contributions))
    out = ensure_dir(Path(args.out))
    (out / "attentiveness.csv").write_text(rows_csv(rows))
    summary = summarize(rows)
    (out / "attentiveness_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_run_manifest(out, "attention-stats", args, {"walks": args.walks, "split": args.split}, args.seed,
                       inputs + [ckpt_dir / TENSORS, ckpt_dir / META],
                       [out / "attentiveness.csv", out / "attentiveness_summary.json"])
    for k, v in sorted(summary.items()):
        print(f"{k:<26} {v}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="attwalk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"attwalk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate the synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--per-class", type=int, default=30, help="meshes per sub-category (10 sub-categories)")
    g.add_argument("--resolutions", type=int_list, default=(1000,), help="face counts, e.g. 1000,2000")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--data", required=True)
    t.add_argument("--mode", choices=("classify", "retrieve"), default="classify")
    t.add_argument("--phase", choices=("1", "2", "both", "single"), default="both")
    t.add_argument("--config", help="key = value file of TrainConfig fields")
    t.add_argument("--out", required=True)
    t.add_argument("--ckpt", help="phase-1 checkpoint for --phase 2 (default OUT/phase1)")
    t.add_argument("--seed", type=int)
    t.add_argument("--phase1-steps", type=int)
    t.add_argument("--phase2-steps", type=int)
    t.add_argument("--aggregator", choices=("attention", "avg_pool", "max_pool", "ha_avg_pool", "ha_max_pool"))
    t.add_argument("--walk-cache", help="walk cache file (created if missing)")
    t.add_argument("--freeze-head", action="store_true", help="also freeze the classification head in phase 2")
    t.add_argument("--debug", action="store_true", help="assert the frozen encoder every phase-2 step")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--walks", type=int_list, default=(8,), help="walk count(s), e.g. 1,2,4,8")
    e.add_argument("--scales", type=int_list, help="face counts (default: the checkpoint's)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--split", default="test")
    e.add_argument("--mode", choices=("auto", "classify", "retrieve"), default="auto")
    e.add_argument("--descriptor", choices=("prediction", "f_a"), default="prediction")
    e.add_argument("--aggregator", choices=("attention", "avg_pool", "max_pool", "ha_avg_pool", "ha_max_pool"))
    e.add_argument("--out", help="output directory (default CKPT/eval)")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("inspect-walks", help="rank one mesh's walks by attention")
    i.add_argument("--mesh", required=True)
    i.add_argument("--ckpt", required=True)
    i.add_argument("--walks", type=int, default=8)
    i.add_argument("--out", required=True)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--scale", type=int, help="decimate to this face count first")
    i.set_defaults(func=cmd_inspect_walks)

    a = sub.add_parser("attention-stats", help="walk geometry of most vs least attentive walks")
    a.add_argument("--data", required=True)
    a.add_argument("--ckpt", required=True)
    a.add_argument("--walks", type=int, default=8)
    a.add_argument("--split", default="test")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_attention_stats)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage errors, 0 for --help
        return int(exc.code or 0)
    try:
        set_threads()
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
