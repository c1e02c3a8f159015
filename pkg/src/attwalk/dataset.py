"""Dataset manifests (CSV of path, label, sublabel, split) and synthetic
dataset generation."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyDataset
from .mesh import Mesh, load_mesh, normalize_unit_cube, save_mesh
from .synthetic import CATEGORIES, generate_synthetic, sublabel_of

MANIFEST = "manifest.csv"
FIELDS = ("path", "label", "sublabel", "split")


@dataclass(frozen=True)
class Entry:
    path: str
    label: int
    sublabel: int
    split: str


def write_manifest(path: str | os.PathLike, entries: Iterable[Entry]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELDS)
        for e in entries:
            w.writerow((e.path, e.label, e.sublabel, e.split))


def read_manifest(path: str | os.PathLike) -> list[Entry]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [Entry(r["path"], int(r["label"]), int(r["sublabel"]), r["split"]) for r in rows]


def mesh_seed(seed: int, category: int, variant: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, category, variant, index]).generate_state(1)[0])


def generate_dataset(out_dir: str | os.PathLike, per_class: int, resolutions: Sequence[int],
                     seed: int = 0) -> list[Entry]:
    """Write ``per_class`` meshes for each of the 10 sub-categories at every
    resolution, split 2:1 train/test within each sub-category."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries: list[Entry] = []
    for ci, cat in enumerate(CATEGORIES):
        for vi in (0, 1):
            order = np.random.default_rng([seed, ci, vi]).permutation(per_class)
            n_train = (2 * per_class) // 3
            train = set(order[:n_train].tolist())
            for k in range(per_class):
                split = "train" if k in train else "test"
                s = mesh_seed(seed, ci, vi, k)
                for res in resolutions:
                    mesh = generate_synthetic(cat, res, s, variant=vi)
                    rel = f"{res}/{cat}_{vi}_{k:03d}.off"
                    (out / str(res)).mkdir(exist_ok=True)
                    save_mesh(mesh, out / rel)
                    entries.append(Entry(rel, ci, sublabel_of(ci, vi), split))
    write_manifest(out / MANIFEST, entries)
    return entries


def load_split(data_dir: str | os.PathLike, split: Optional[str] = None, normalize: bool = True) -> list[Mesh]:
    """Meshes of one split (all splits when ``split`` is None), labeled and
    normalized to the unit cube."""
    root = Path(data_dir)
    manifest = root / MANIFEST
    if not manifest.exists():
        raise EmptyDataset(f"no {MANIFEST} in {root}")
    meshes = []
    for e in read_manifest(manifest):
        if split is not None and e.split != split:
            continue
        m = load_mesh(root / e.path)
        m = Mesh(m.vertices, m.faces, e.label, e.sublabel, e.path)
        meshes.append(normalize_unit_cube(m) if normalize else m)
    return meshes
