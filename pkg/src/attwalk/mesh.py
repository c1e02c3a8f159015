"""Triangle meshes: container, OFF/OBJ I/O, validation and normalization."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateMesh, EmptyMesh, ParseError


def build_adjacency(n_vertices: int, faces: np.ndarray) -> tuple[tuple[int, ...], ...]:
    """Sorted neighbor lists for every vertex, from the face edges."""
    nbrs: list[set[int]] = [set() for _ in range(n_vertices)]
    for a, b, c in faces.tolist():
        nbrs[a].update((b, c))
        nbrs[b].update((a, c))
        nbrs[c].update((a, b))
    return tuple(tuple(sorted(s)) for s in nbrs)


@dataclass(frozen=True, eq=False)
class BoundingBox:
    min: np.ndarray
    max: np.ndarray

    @classmethod
    def of(cls, points: np.ndarray) -> "BoundingBox":
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    ``vertices`` is (V, 3) float64 and ``faces`` is (F, 3) int64. The
    adjacency is derived from the faces at construction time.
    """

    vertices: np.ndarray
    faces: np.ndarray
    label: Optional[int] = None
    sublabel: Optional[int] = None
    name: str = ""
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            bad = int(f.max()) if f.max() >= len(v) else int(f.min())
            raise IndexError(f"face index {bad} out of range for {len(v)} vertices")
        if len(f) and np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise DegenerateMesh("face with repeated vertex index")
        v.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "adjacency", build_adjacency(len(v), f))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def bbox(self) -> BoundingBox:
        return BoundingBox.of(self.vertices)

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(vertices, self.faces, self.label, self.sublabel, self.name)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array with i < j."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)


def normalize_unit_cube(mesh: Mesh) -> Mesh:
    """Center the bounding box at the origin and scale its longest side to 1."""
    if mesh.n_vertices < 1:
        raise EmptyMesh("mesh has no vertices")
    box = mesh.bbox()
    longest = float(box.extent.max())
    if longest <= 0.0:
        raise DegenerateMesh("bounding box has zero extent")
    return mesh.with_vertices((mesh.vertices - box.center) / longest)


# ---------------------------------------------------------------------------
# readers / writers

def _polygon_to_triangles(idx: Sequence[int], lineno: int) -> list[tuple[int, int, int]]:
    if len(idx) == 3:
        return [tuple(idx)]
    if len(idx) == 4:
        a, b, c, d = idx
        return [(a, b, c), (a, c, d)]
    raise ParseError(f"line {lineno}: only triangles and quads are supported, got {len(idx)}-gon")


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_off(text: str, name: str = "") -> Mesh:
    lines = list(_content_lines(text))
    if not lines:
        raise ParseError("empty OFF file")
    lineno, head = lines[0]
    tokens = head.split()
    if tokens[0] != "OFF":
        raise ParseError(f"line {lineno}: missing OFF header")
    # counts may share the header line ("OFF 3 1 0")
    rest = tokens[1:]
    pos = 1
    if not rest:
        if len(lines) < 2:
            raise ParseError("OFF file truncated before counts")
        lineno, counts = lines[1]
        rest = counts.split()
        pos = 2
    try:
        n_v, n_f = int(rest[0]), int(rest[1])
    except (ValueError, IndexError):
        raise ParseError(f"line {lineno}: malformed OFF counts") from None
    if len(lines) < pos + n_v + n_f:
        raise ParseError("OFF file truncated")
    verts = np.empty((n_v, 3))
    for k in range(n_v):
        lineno, line = lines[pos + k]
        try:
            verts[k] = [float(t) for t in line.split()[:3]]
        except ValueError:
            raise ParseError(f"line {lineno}: malformed vertex") from None
    tris: list[tuple[int, int, int]] = []
    for k in range(n_f):
        lineno, line = lines[pos + n_v + k]
        try:
            vals = [int(t) for t in line.split()]
        except ValueError:
            raise ParseError(f"line {lineno}: malformed face") from None
        if not vals or len(vals) < vals[0] + 1:
            raise ParseError(f"line {lineno}: face shorter than its vertex count")
        tris.extend(_polygon_to_triangles(vals[1:vals[0] + 1], lineno))
    return _finish(verts, tris, name)


def parse_obj(text: str, name: str = "") -> Mesh:
    verts: list[list[float]] = []
    tris: list[tuple[int, int, int]] = []
    for lineno, line in _content_lines(text):
        tokens = line.split()
        if tokens[0] == "v":
            try:
                verts.append([float(t) for t in tokens[1:4]])
            except ValueError:
                raise ParseError(f"line {lineno}: malformed vertex") from None
            if len(verts[-1]) != 3:
                raise ParseError(f"line {lineno}: vertex needs 3 coordinates")
        elif tokens[0] == "f":
            idx = []
            for t in tokens[1:]:
                try:
                    i = int(t.split("/")[0])
                except ValueError:
                    raise ParseError(f"line {lineno}: malformed face") from None
                # negative indices are relative to the current vertex count
                idx.append(i - 1 if i > 0 else len(verts) + i)
            tris.extend(_polygon_to_triangles(idx, lineno))
    return _finish(np.array(verts, dtype=np.float64).reshape(-1, 3), tris, name)


def _finish(verts: np.ndarray, tris: list, name: str) -> Mesh:
    if not tris:
        raise EmptyMesh("mesh has no faces")
    return Mesh(verts, np.array(tris, dtype=np.int64), name=name)


def load_mesh(path: str | os.PathLike, format: Optional[str] = None) -> Mesh:
    """Read an ASCII OFF or OBJ file. ``format`` defaults to the file suffix."""
    path = os.fspath(path)
    fmt = (format or os.path.splitext(path)[1].lstrip(".")).upper()
    with open(path) as fh:
        text = fh.read()
    name = os.path.splitext(os.path.basename(path))[0]
    if fmt == "OFF":
        return parse_off(text, name)
    if fmt == "OBJ":
        return parse_obj(text, name)
    raise ParseError(f"unsupported mesh format {fmt!r}")


def format_off(mesh: Mesh) -> str:
    out = [f"OFF\n{mesh.n_vertices} {mesh.n_faces} 0\n"]
    out.extend(f"{x!r} {y!r} {z!r}\n" for x, y, z in mesh.vertices.tolist())
    out.extend(f"3 {a} {b} {c}\n" for a, b, c in mesh.faces.tolist())
    return "".join(out)


def format_obj(mesh: Mesh) -> str:
    out = [f"v {x!r} {y!r} {z!r}\n" for x, y, z in mesh.vertices.tolist()]
    out.extend(f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in mesh.faces.tolist())
    return "".join(out)


def save_mesh(mesh: Mesh, path: str | os.PathLike, format: Optional[str] = None) -> None:
    path = os.fspath(path)
    fmt = (format or os.path.splitext(path)[1].lstrip(".")).upper()
    text = {"OFF": format_off, "OBJ": format_obj}.get(fmt)
    if text is None:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text(mesh))
