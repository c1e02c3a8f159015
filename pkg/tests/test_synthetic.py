import numpy as np
import pytest

from attwalk.errors import UnknownClass
from attwalk.mesh import normalize_unit_cube
from attwalk.synthetic import CATEGORIES, VARIANTS, generate_synthetic, icosphere, sublabel_of

from test_decimate import directed_edges_unique, edge_face_counts


def signed_volume(m):
    p = m.vertices[m.faces]
    return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6)


def test_same_seed_bit_identical():
    a = generate_synthetic("sphere", 1000, seed=7)
    b = generate_synthetic("sphere", 1000, seed=7)
    assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.faces, b.faces)


def test_different_seed_differs_same_labels():
    a = generate_synthetic("torus", 1000, seed=1)
    b = generate_synthetic("torus", 1000, seed=2)
    assert not np.array_equal(a.vertices, b.vertices)
    assert (a.label, a.sublabel) == (b.label, b.sublabel)


@pytest.mark.parametrize("seed", [0, 5, 11])
def test_box_normalizes_to_unit_cube(seed):
    m = normalize_unit_cube(generate_synthetic("box", 500, seed=seed))
    ext = m.bbox().extent
    assert ext.max() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(m.bbox().center, 0.0, atol=1e-12)


def test_unknown_class():
    with pytest.raises(UnknownClass):
        generate_synthetic("teapot", 1000, seed=0)
    with pytest.raises(UnknownClass):
        generate_synthetic("torus/lumpy", 1000, seed=0)


@pytest.mark.parametrize("cat", CATEGORIES)
@pytest.mark.parametrize("variant", [0, 1])
def test_watertight_outward_and_near_resolution(cat, variant):
    m = generate_synthetic(cat, 1000, seed=4, variant=variant)
    assert 850 <= m.n_faces <= 1000
    assert set(edge_face_counts(m.faces).values()) == {2}
    assert directed_edges_unique(m.faces)
    assert signed_volume(m) > 0
    assert m.label == CATEGORIES.index(cat)
    assert m.sublabel == sublabel_of(m.label, variant)


def test_named_variant_matches_index():
    a = generate_synthetic("torus/fat", 600, seed=3)
    b = generate_synthetic("torus", 600, seed=3, variant=VARIANTS["torus"].index("fat"))
    assert np.array_equal(a.vertices, b.vertices)


def test_jitter_scale():
    # jitter is 2% of the extent: displacements from the noiseless shape are small
    m0 = generate_synthetic("sphere", 1000, seed=0)
    m1 = generate_synthetic("sphere", 1000, seed=1)
    diff = m0.vertices - m1.vertices
    extent = m0.bbox().extent.max()
    assert 0.02 * extent * np.sqrt(2) * 0.8 < diff.std() < 0.02 * extent * np.sqrt(2) * 1.2


def test_sublabels_unique_across_dataset():
    subs = {sublabel_of(c, v) for c in range(len(CATEGORIES)) for v in (0, 1)}
    assert subs == set(range(10))


def test_icosphere_counts():
    assert icosphere(3).n_faces == 1280
    assert icosphere(0).n_vertices == 12
