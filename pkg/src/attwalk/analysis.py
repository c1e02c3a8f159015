"""Descriptive statistics relating walk attentiveness to walk geometry.

These are dataset-level observations (does the most attentive walk cover
more ground, or turn more, than the least attentive one?), not contracts.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mesh import Mesh
from .walks import Walk


def euclidean_length(mesh: Mesh, walk: Walk) -> float:
    """Total length of the walk's steps in model units."""
    pts = mesh.vertices[walk.vertex_ids]
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def mean_turning_angle(mesh: Mesh, walk: Walk) -> float:
    """Mean angle (radians) between consecutive non-zero steps; a curvature proxy."""
    steps = np.diff(mesh.vertices[walk.vertex_ids], axis=0)
    norms = np.linalg.norm(steps, axis=1)
    steps = steps[norms > 0] / norms[norms > 0, None]
    if len(steps) < 2:
        return 0.0
    cos = np.clip((steps[:-1] * steps[1:]).sum(axis=1), -1.0, 1.0)
    return float(np.arccos(cos).mean())


@dataclass
class AttentivenessRow:
    mesh_id: str
    top_contribution: float
    bottom_contribution: float
    top_length: float
    bottom_length: float
    top_turning: float
    bottom_turning: float


def attentiveness_row(mesh: Mesh, walks: Sequence[Walk], contributions) -> AttentivenessRow:
    c = np.asarray(contributions, dtype=np.float64)
    order = sorted(range(len(c)), key=lambda j: (-c[j], j))
    top, bottom = walks[order[0]], walks[order[-1]]
    return AttentivenessRow(
        mesh.name, float(c[order[0]]), float(c[order[-1]]),
        euclidean_length(mesh, top), euclidean_length(mesh, bottom),
        mean_turning_angle(mesh, top), mean_turning_angle(mesh, bottom),
    )


def summarize(rows: Sequence[AttentivenessRow]) -> dict:
    """Mean relative excess of the most attentive walk over the least attentive one."""
    def rel(a, b):
        a, b = np.asarray(a), np.asarray(b)
        return float(np.mean(a) / np.mean(b) - 1.0) if np.mean(b) > 0 else 0.0

    return {
        "meshes": len(rows),
        "mean_top_contribution": float(np.mean([r.top_contribution for r in rows])),
        "mean_bottom_contribution": float(np.mean([r.bottom_contribution for r in rows])),
        "length_excess": rel([r.top_length for r in rows], [r.bottom_length for r in rows]),
        "turning_excess": rel([r.top_turning for r in rows], [r.bottom_turning for r in rows]),
    }


def rows_csv(rows: Sequence[AttentivenessRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("mesh_id", "top_contribution", "bottom_contribution", "top_length",
                "bottom_length", "top_turning", "bottom_turning"))
    for r in rows:
        w.writerow((r.mesh_id, *(repr(float(x)) for x in (
            r.top_contribution, r.bottom_contribution, r.top_length, r.bottom_length,
            r.top_turning, r.bottom_turning))))
    return buf.getvalue()
