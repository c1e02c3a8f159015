"""Random walks over mesh vertices and their 3D-offset encoding."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import ParseError
from .mesh import Mesh

MIN_WALK_LENGTH = 32
MAX_WALK_LENGTH = 400
COVERAGE = 0.3


@dataclass(frozen=True, eq=False)
class Walk:
    """Ordered vertex ids. ``jump_flags[t]`` marks that vertex t was reached
    by a restart jump instead of an edge (always False at t = 0)."""

    vertex_ids: np.ndarray
    jump_flags: np.ndarray

    def __len__(self) -> int:
        return len(self.vertex_ids)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Walk)
            and np.array_equal(self.vertex_ids, other.vertex_ids)
            and np.array_equal(self.jump_flags, other.jump_flags)
        )


@dataclass(frozen=True, eq=False)
class WalkFeatureSequence:
    deltas: np.ndarray  # (len(walk) - 1, 3)

    def __len__(self) -> int:
        return len(self.deltas)


def default_walk_length(mesh: Mesh) -> int:
    n = int(np.floor(COVERAGE * mesh.n_vertices + 0.5))
    return min(max(n, MIN_WALK_LENGTH), MAX_WALK_LENGTH)


def sample_walk(mesh: Mesh, length: int, rng: np.random.Generator, start: Optional[int] = None) -> Walk:
    """Random walk of ``length`` vertices.

    The next vertex is uniform over the unvisited neighbors of the current
    one; if all neighbors were visited it is uniform over all neighbors, and
    an isolated vertex triggers a uniform jump to any vertex.
    """
    if mesh.n_vertices == 0:
        raise ValueError("cannot walk on a mesh without vertices")
    if length < 2:
        raise ValueError(f"walk length must be >= 2, got {length}")
    adjacency = mesh.adjacency
    n = mesh.n_vertices
    # one uniform draw per vertex; index = floor(u * n_candidates)
    u = rng.random(length)
    ids = np.empty(length, dtype=np.int64)
    jumps = np.zeros(length, dtype=bool)
    cur = int(u[0] * n) if start is None else int(start)
    ids[0] = cur
    visited = {cur}
    for t in range(1, length):
        nbrs = adjacency[cur]
        if not nbrs:
            cur = int(u[t] * n)
            jumps[t] = True
        else:
            fresh = [w for w in nbrs if w not in visited]
            pool = fresh if fresh else nbrs
            cur = pool[int(u[t] * len(pool))]
        ids[t] = cur
        visited.add(cur)
    return Walk(ids, jumps)


def encode_walk(mesh: Mesh, walk: Walk) -> WalkFeatureSequence:
    ids = walk.vertex_ids
    if ids.min() < 0 or ids.max() >= mesh.n_vertices:
        raise IndexError("walk references a vertex outside the mesh")
    pos = mesh.vertices[ids]
    return WalkFeatureSequence(np.diff(pos, axis=0))


def sample_walk_set(mesh: Mesh, n_walks: int, length: int, rng: np.random.Generator):
    """``n_walks`` independent walks, each driven by its own child generator."""
    if n_walks < 1:
        raise ValueError(f"n_walks must be >= 1, got {n_walks}")
    out = []
    for child in rng.spawn(n_walks):
        w = sample_walk(mesh, length, child)
        out.append((w, encode_walk(mesh, w)))
    return out


# ---------------------------------------------------------------------------
# binary walk cache: b"AWLK" + u32 count, then per record
#   u16 id_len, id bytes (utf-8), u64 seed, u32 length, u32[length] vertex ids

MAGIC = b"AWLK"


@dataclass(frozen=True)
class CachedWalk:
    mesh_id: str
    seed: int
    vertex_ids: tuple[int, ...]


def write_walk_cache(path: str | os.PathLike, records: Iterable[CachedWalk]) -> None:
    records = list(records)
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<I", len(records)))
        for r in records:
            name = r.mesh_id.encode()
            fh.write(struct.pack("<HQI", len(name), r.seed, len(r.vertex_ids)))
            fh.write(name)
            fh.write(np.asarray(r.vertex_ids, dtype="<u4").tobytes())


def read_walk_cache(path: str | os.PathLike) -> list[CachedWalk]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ParseError("not a walk cache (bad magic)")
    (count,) = struct.unpack_from("<I", data, 4)
    off = 8
    out = []
    for _ in range(count):
        n_name, seed, length = struct.unpack_from("<HQI", data, off)
        off += struct.calcsize("<HQI")
        name = data[off:off + n_name].decode()
        off += n_name
        ids = np.frombuffer(data, dtype="<u4", count=length, offset=off)
        off += 4 * length
        out.append(CachedWalk(name, seed, tuple(int(i) for i in ids)))
    return out


def walk_from_ids(mesh: Mesh, vertex_ids) -> Walk:
    """Rebuild a Walk, recovering jump flags (only isolated vertices jump)."""
    ids = np.asarray(vertex_ids, dtype=np.int64)
    jumps = np.zeros(len(ids), dtype=bool)
    for t in range(1, len(ids)):
        jumps[t] = not mesh.adjacency[ids[t - 1]]
    return Walk(ids, jumps)
