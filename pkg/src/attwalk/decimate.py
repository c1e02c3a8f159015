"""Naive mesh simplification by iterative shortest-edge collapse."""
from __future__ import annotations

import heapq

import numpy as np

from .errors import DecimationStall
from .mesh import Mesh


def _normal(p0, p1, p2):
    return np.cross(p1 - p0, p2 - p0)


def decimate(mesh: Mesh, target_faces: int) -> Mesh:
    """Collapse shortest edges until the mesh has at most ``target_faces`` faces.

    Each collapse merges an edge into its midpoint. Collapses that would flip
    a surviving face, create a degenerate face, or break the link condition
    are rejected. Unreferenced vertices are dropped from the result.
    """
    if target_faces < 4:
        raise ValueError(f"target_faces must be >= 4, got {target_faces}")
    if mesh.n_faces <= target_faces:
        return mesh

    pos = mesh.vertices.copy()
    faces = mesh.faces.copy()
    face_alive = np.ones(len(faces), dtype=bool)
    n_alive = len(faces)
    vert_faces: list[set[int]] = [set() for _ in range(len(pos))]
    for fi, tri in enumerate(faces.tolist()):
        for v in tri:
            vert_faces[v].add(fi)
    nbrs = [set(a) for a in mesh.adjacency]

    heap: list[tuple[float, int, int]] = []

    def push(u: int, w: int) -> None:
        a, b = (u, w) if u < w else (w, u)
        d = pos[a] - pos[b]
        heapq.heappush(heap, (float(d @ d), a, b))

    for a, b in mesh.edges().tolist():
        push(a, b)

    while n_alive > target_faces:
        if not heap:
            raise DecimationStall(
                f"no collapsible edge left at {n_alive} faces (target {target_faces})"
            )
        length2, u, v = heapq.heappop(heap)
        if v not in nbrs[u]:
            continue
        d = pos[u] - pos[v]
        if float(d @ d) != length2:
            continue  # stale entry; a fresh one was pushed when u or v moved
        shared = vert_faces[u] & vert_faces[v]
        if len(nbrs[u] & nbrs[v]) != len(shared):
            continue  # link condition
        if n_alive - len(shared) < 4 and n_alive > 4:
            continue
        mid = 0.5 * (pos[u] + pos[v])
        if not _collapse_keeps_orientation(pos, faces, vert_faces, u, v, mid, shared):
            continue

        for fi in shared:
            face_alive[fi] = False
            for w in faces[fi]:
                vert_faces[w].discard(fi)
        n_alive -= len(shared)
        for fi in vert_faces[v]:
            tri = faces[fi]
            tri[tri == v] = u
            vert_faces[u].add(fi)
        vert_faces[v] = set()
        for w in nbrs[v]:
            nbrs[w].discard(v)
            if w != u:
                nbrs[w].add(u)
                nbrs[u].add(w)
        nbrs[u].discard(v)
        nbrs[v] = set()
        pos[u] = mid
        for w in nbrs[u]:
            push(u, w)

    kept = faces[face_alive]
    used = np.unique(kept)
    remap = np.full(len(pos), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh(pos[used], remap[kept], mesh.label, mesh.sublabel, mesh.name)


def _collapse_keeps_orientation(pos, faces, vert_faces, u, v, mid, shared) -> bool:
    for w, other in ((u, v), (v, u)):
        for fi in vert_faces[w]:
            if fi in shared:
                continue
            tri = faces[fi]
            before = _normal(pos[tri[0]], pos[tri[1]], pos[tri[2]])
            moved = [mid if k == w else pos[k] for k in tri]
            after = _normal(*moved)
            if float(before @ after) <= 0.0 or not np.any(after):
                return False
    return True
