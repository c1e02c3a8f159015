"""Seeded synthetic shape categories used as a desk-scale dataset.

Five categories, each with two sub-variants::

    sphere   : round, slim (prolate ellipsoid)
    box      : cube, slim (tall box)
    cylinder : tall, flat
    cone     : tall, flat
    torus    : thin, fat
"""
from __future__ import annotations

import math

import numpy as np

from .errors import UnknownClass
from .mesh import Mesh

CATEGORIES = ("sphere", "box", "cylinder", "cone", "torus")
VARIANTS = {
    "sphere": ("round", "slim"),
    "box": ("cube", "slim"),
    "cylinder": ("tall", "flat"),
    "cone": ("tall", "flat"),
    "torus": ("thin", "fat"),
}
JITTER = 0.02


def sublabel_of(category: int, variant: int) -> int:
    return 2 * category + variant


def _parse_class(class_id: str, variant) -> tuple[int, int]:
    name, _, sub = class_id.partition("/")
    if name not in VARIANTS:
        raise UnknownClass(class_id)
    if sub:
        if sub not in VARIANTS[name]:
            raise UnknownClass(class_id)
        variant = VARIANTS[name].index(sub)
    if variant not in (0, 1):
        raise UnknownClass(f"{class_id} variant {variant}")
    return CATEGORIES.index(name), int(variant)


def revolve(profile: np.ndarray, n_around: int, closed: bool = False):
    """Surface of revolution about z. ``profile`` rows are (radius, z).

    Open profiles must start and end on the axis (radius 0); those end points
    become single pole vertices. Closed profiles wrap around (torus).
    """
    theta = 2 * np.pi * np.arange(n_around) / n_around
    ct, st = np.cos(theta), np.sin(theta)
    verts: list = []
    ring_ids: list = []
    for k, (r, z) in enumerate(profile):
        pole = not closed and k in (0, len(profile) - 1)
        if pole:
            ring_ids.append([len(verts)] * n_around)
            verts.append((0.0, 0.0, z))
        else:
            ring_ids.append(list(range(len(verts), len(verts) + n_around)))
            verts.extend(zip(r * ct, r * st, np.full(n_around, z)))
    n_rings = len(profile)
    faces = []
    for k in range(n_rings if closed else n_rings - 1):
        lo, hi = ring_ids[k], ring_ids[(k + 1) % n_rings]
        for j in range(n_around):
            jn = (j + 1) % n_around
            a, b, c, d = lo[j], lo[jn], hi[jn], hi[j]
            if a != b:
                faces.append((a, b, c))
            if c != d:
                faces.append((a, c, d))
    return np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64)


def _orient_outward(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p0, p1, p2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    signed_volume = np.einsum("ij,ij->i", p0, np.cross(p1, p2)).sum()
    return faces[:, [0, 2, 1]] if signed_volume < 0 else faces


def _box(k: int, size) -> tuple[np.ndarray, np.ndarray]:
    index: dict = {}
    verts: list = []

    def vid(p):
        if p not in index:
            index[p] = len(verts)
            verts.append(p)
        return index[p]

    faces = []
    for axis in range(3):
        u_ax, v_ax = [a for a in range(3) if a != axis]
        for side in (0, k):
            for i in range(k):
                for j in range(k):
                    quad = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = [0, 0, 0]
                        p[axis], p[u_ax], p[v_ax] = side, i + di, j + dj
                        quad.append(vid(tuple(p)))
                    a, b, c, d = quad
                    faces += [(a, b, c), (a, c, d)]
    v = (np.array(verts, dtype=np.float64) / k - 0.5) * np.asarray(size)
    f = np.array(faces, dtype=np.int64)
    # convex and centered: a face points outward iff its normal faces away from 0
    p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    inward = np.einsum("ij,ij->i", np.cross(p1 - p0, p2 - p0), p0 + p1 + p2) < 0
    f[inward] = f[inward][:, [0, 2, 1]]
    return v, f


def _cap(radius: float, z: float, n: int, reverse: bool) -> list:
    pts = [(radius * i / n, z) for i in range(n + 1)]
    return pts[::-1] if reverse else pts


def _make(category: str, variant: int, resolution: int):
    if category == "sphere":
        scale = (1.0, 1.0, 1.0) if variant == 0 else (0.55, 0.55, 1.0)
        rings = max(2, int(math.sqrt(resolution / 4)))
        n_around = max(3, resolution // (2 * rings))
        phi = np.linspace(0, np.pi, rings + 1)
        profile = np.stack([np.sin(phi), -np.cos(phi)], axis=1)
        v, f = revolve(profile, n_around)
        return v * np.asarray(scale), f
    if category == "box":
        k = max(1, int(math.sqrt(resolution / 12)))
        size = (1.0, 1.0, 1.0) if variant == 0 else (0.45, 0.45, 1.0)
        return _box(k, size)
    if category in ("cylinder", "cone"):
        radius, height = (0.35, 1.0) if variant == 0 else (0.5, 0.35)
        # profile points: bottom cap, side, (top cap | apex)
        cap_n = 3
        if category == "cylinder":
            side_n = max(1, round(height / (2 * np.pi * radius) * 12))
            n_pts = 2 * (cap_n + 1) + side_n - 1
        else:
            side_n = max(2, round(math.hypot(radius, height) / (2 * np.pi * radius) * 16))
            n_pts = cap_n + 1 + side_n
        n_around = max(3, resolution // (2 * (n_pts - 2)))
        bottom = _cap(radius, -height / 2, cap_n, reverse=False)
        if category == "cylinder":
            side = [(radius, -height / 2 + height * i / side_n) for i in range(1, side_n)]
            top = _cap(radius, height / 2, cap_n, reverse=True)
        else:
            side = [(radius * (1 - i / side_n), -height / 2 + height * i / side_n) for i in range(1, side_n)]
            top = [(0.0, height / 2)]
        v, f = revolve(np.array(bottom + side + top), n_around)
        return v, f
    if category == "torus":
        minor = 0.2 if variant == 0 else 0.5
        n_minor = max(3, int(math.sqrt(resolution / 2 * minor)))
        n_major = max(3, resolution // (2 * n_minor))
        phi = 2 * np.pi * np.arange(n_minor) / n_minor
        profile = np.stack([1.0 + minor * np.cos(phi), minor * np.sin(phi)], axis=1)
        return revolve(profile, n_major, closed=True)
    raise UnknownClass(category)


def generate_synthetic(class_id: str, resolution: int, seed: int, variant: int = 0) -> Mesh:
    """Deterministic jittered watertight mesh with at most ``resolution`` faces.

    ``class_id`` is a category name, optionally suffixed with a sub-variant
    (``"torus/fat"``); otherwise ``variant`` (0 or 1) picks it.
    """
    cat, var = _parse_class(class_id, variant)
    name = CATEGORIES[cat]
    verts, faces = _make(name, var, int(resolution))
    faces = _orient_outward(verts, faces)
    rng = np.random.default_rng(seed)
    extent = float((verts.max(axis=0) - verts.min(axis=0)).max())
    verts = verts + rng.normal(scale=JITTER * extent, size=verts.shape)
    return Mesh(
        verts,
        faces,
        label=cat,
        sublabel=sublabel_of(cat, var),
        name=f"{name}_{VARIANTS[name][var]}_r{resolution}_s{seed}",
    )


def icosphere(subdivisions: int = 3) -> Mesh:
    """Unit icosphere with 20 * 4**subdivisions faces."""
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache: dict = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                cache[key] = len(verts)
                verts.append(m / np.linalg.norm(m))
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    v = np.array(verts)
    return Mesh(v, _orient_outward(v, np.array(faces)), name=f"icosphere{subdivisions}")
