import numpy as np
import pytest

from attwalk.decimate import decimate
from attwalk.mesh import Mesh, build_adjacency
from attwalk.synthetic import CATEGORIES, generate_synthetic, icosphere


def edge_face_counts(faces):
    counts = {}
    for f in faces.tolist():
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    return counts


def directed_edges_unique(faces):
    seen = set()
    for f in faces.tolist():
        for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            if e in seen:
                return False
            seen.add(e)
    return True


def assert_valid(m: Mesh):
    assert m.faces.min() >= 0 and m.faces.max() < m.n_vertices
    f = m.faces
    assert np.all((f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2]))
    assert build_adjacency(m.n_vertices, m.faces) == m.adjacency
    assert len({tuple(sorted(t)) for t in f.tolist()}) == len(f)


def test_small_mesh_returned_unchanged():
    m = generate_synthetic("sphere", 500, seed=0)
    assert m.n_faces <= 500
    assert decimate(m, 1000) is m


def test_icosphere_1280_to_320():
    m = icosphere(3)
    assert m.n_faces == 1280
    out = decimate(m, 320)
    assert out.n_faces <= 320
    assert_valid(out)
    # still a closed, consistently oriented 2-manifold
    assert set(edge_face_counts(out.faces).values()) == {2}
    assert directed_edges_unique(out.faces)


def test_orientation_kept_on_convex_shape():
    out = decimate(icosphere(3), 320)
    p = out.vertices[out.faces]
    normals = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    # outward normals on a (near-)sphere centered at the origin
    assert np.all((normals * p.mean(axis=1)).sum(axis=1) > 0)


def test_target_below_four_rejected():
    with pytest.raises(ValueError):
        decimate(icosphere(1), 3)


@pytest.mark.parametrize("cat", CATEGORIES)
def test_synthetic_shapes_decimate(cat):
    m = generate_synthetic(cat, 1000, seed=3)
    out = decimate(m, 250)
    assert out.n_faces <= 250
    assert_valid(out)
    assert set(edge_face_counts(out.faces).values()) == {2}


def test_decimate_is_deterministic():
    a = decimate(icosphere(3), 500)
    b = decimate(icosphere(3), 500)
    assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.faces, b.faces)


def test_labels_carried_over():
    m = generate_synthetic("torus/fat", 1000, seed=2)
    out = decimate(m, 400)
    assert (out.label, out.sublabel, out.name) == (m.label, m.sublabel, m.name)
