"""Export walks as a vertex-colored ASCII PLY for external viewers."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .mesh import Mesh

GRAY = (160, 160, 160)
# Cold-to-hot ramp stops: blue, cyan, green, yellow, red.
RAMP = np.array([(0, 0, 255), (0, 255, 255), (0, 255, 0), (255, 255, 0), (255, 0, 0)], dtype=np.float64)


def ramp_color(t: float) -> tuple[int, int, int]:
    """Color at position t in [0, 1] on the cold-to-hot ramp."""
    t = float(np.clip(t, 0.0, 1.0)) * (len(RAMP) - 1)
    k = min(int(t), len(RAMP) - 2)
    c = RAMP[k] + (t - k) * (RAMP[k + 1] - RAMP[k])
    return tuple(int(round(x)) for x in c)


def vertex_colors(mesh: Mesh, walks: Sequence, weights: Sequence[float]) -> np.ndarray:
    """(V, 3) uint8 colors. Walks are painted in ascending weight order, so a
    vertex shared by several walks shows the heaviest one."""
    if len(walks) != len(weights):
        raise ValueError(f"{len(walks)} walks but {len(weights)} weights")
    colors = np.tile(np.array(GRAY, dtype=np.uint8), (mesh.n_vertices, 1))
    if not len(walks):
        return colors
    w = np.asarray(weights, dtype=np.float64)
    top = w.max()
    for j in np.argsort(w, kind="stable"):
        ids = np.asarray(getattr(walks[j], "vertex_ids", walks[j]), dtype=np.int64)
        if len(ids) and (ids.min() < 0 or ids.max() >= mesh.n_vertices):
            raise IndexError(f"walk {j} references a vertex outside 0..{mesh.n_vertices - 1}")
        colors[ids] = ramp_color(w[j] / top if top > 0 else 1.0)
    return colors


def export_walk_overlay(mesh: Mesh, walks: Sequence, weights: Sequence[float]) -> bytes:
    colors = vertex_colors(mesh, walks, weights)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for p, c in zip(mesh.vertices.tolist(), colors.tolist()):
        lines.append(f"{p[0]!r} {p[1]!r} {p[2]!r} {c[0]} {c[1]} {c[2]}")
    for a, b, c in mesh.faces.tolist():
        lines.append(f"3 {a} {b} {c}")
    return ("\n".join(lines) + "\n").encode("ascii")
