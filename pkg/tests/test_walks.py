import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attwalk.errors import ParseError
from attwalk.mesh import Mesh
from attwalk.synthetic import generate_synthetic, icosphere
from attwalk.walks import (
    CachedWalk, Walk, default_walk_length, encode_walk, read_walk_cache, sample_walk,
    sample_walk_set, walk_from_ids, write_walk_cache,
)

TRIANGLE = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
TETRA = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])


def test_triangle_walk_is_permutation():
    for seed in range(100):
        w = sample_walk(TRIANGLE, 3, np.random.default_rng(seed))
        assert sorted(w.vertex_ids.tolist()) == [0, 1, 2]


def test_middle_vertex_second_step_is_fair():
    # vertex 1 of the triangle has neighbors {0, 2}, like the middle of a path 0-1-2
    firsts = np.array([sample_walk(TRIANGLE, 2, np.random.default_rng(s), start=1).vertex_ids[1]
                       for s in range(10_000)])
    assert set(firsts.tolist()) == {0, 2}
    assert abs(np.mean(firsts == 0) - 0.5) < 0.05


def test_next_step_uniform_over_unvisited_neighbors():
    m = icosphere(1)
    start = 0
    nbrs = m.adjacency[start]
    counts = np.zeros(len(nbrs))
    trials = 12_000
    for s in range(trials):
        nxt = sample_walk(m, 2, np.random.default_rng(s), start=start).vertex_ids[1]
        counts[nbrs.index(nxt)] += 1
    p = 1.0 / len(nbrs)
    sigma = np.sqrt(trials * p * (1 - p))
    assert np.all(np.abs(counts - trials * p) < 3 * sigma)


def test_first_vertex_uniform():
    m = icosphere(0)
    counts = np.bincount([sample_walk(m, 2, np.random.default_rng(s)).vertex_ids[0] for s in range(12_000)],
                         minlength=12)
    sigma = np.sqrt(12_000 * (1 / 12) * (11 / 12))
    assert np.all(np.abs(counts - 1000) < 3 * sigma)


def test_deterministic():
    m = generate_synthetic("cone", 1000, seed=0)
    a = sample_walk(m, 100, np.random.default_rng(5))
    b = sample_walk(m, 100, np.random.default_rng(5))
    assert a == b


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["sphere", "box", "torus"]))
def test_steps_are_edges_or_jumps(seed, cat):
    m = generate_synthetic(cat, 200, seed=1)
    w = sample_walk(m, 80, np.random.default_rng(seed))
    assert not w.jump_flags[0]
    for t in range(1, len(w)):
        a, b = int(w.vertex_ids[t - 1]), int(w.vertex_ids[t])
        assert w.jump_flags[t] or b in m.adjacency[a]


def test_isolated_vertex_jumps():
    # vertex 3 is unreferenced, hence isolated
    m = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [3, 3, 3]], [[0, 1, 2]])
    w = sample_walk(m, 6, np.random.default_rng(0), start=3)
    assert w.jump_flags[1]
    assert walk_from_ids(m, w.vertex_ids) == w


def test_no_revisit_on_complete_graph_exhaustive():
    for seed in range(500):
        for length in (2, 3, 4):
            ids = sample_walk(TETRA, length, np.random.default_rng(seed)).vertex_ids
            assert len(set(ids.tolist())) == length


@pytest.mark.parametrize("mesh", [icosphere(0), icosphere(1), generate_synthetic("box", 30, seed=0)])
def test_revisits_only_when_trapped(mesh):
    """The unvisited-first policy is the only source of revisits: a vertex is
    revisited only when every neighbor of the current vertex was visited."""
    assert mesh.n_vertices <= 45
    for seed in range(300):
        w = sample_walk(mesh, mesh.n_vertices, np.random.default_rng(seed))
        seen = {int(w.vertex_ids[0])}
        for t in range(1, len(w)):
            cur, nxt = int(w.vertex_ids[t - 1]), int(w.vertex_ids[t])
            if nxt in seen:
                assert all(v in seen for v in mesh.adjacency[cur])
            seen.add(nxt)


@pytest.mark.parametrize("n_vertices, expected", [(1000, 300), (10, 32), (10_000, 400)])
def test_default_walk_length(n_vertices, expected):
    m = Mesh(np.random.default_rng(0).normal(size=(n_vertices, 3)), [[0, 1, 2]])
    assert default_walk_length(m) == expected


def test_encode_walk_deltas():
    m = Mesh([[0, 0, 0], [1, 0, 0], [1, 1, 0]], [[0, 1, 2]])
    seq = encode_walk(m, Walk(np.array([0, 1, 2]), np.zeros(3, bool)))
    assert np.array_equal(seq.deltas, [[1, 0, 0], [0, 1, 0]])
    seq = encode_walk(m, Walk(np.array([0, 0]), np.zeros(2, bool)))
    assert np.array_equal(seq.deltas, [[0, 0, 0]])


def test_encode_walk_bad_index():
    with pytest.raises(IndexError):
        encode_walk(TRIANGLE, Walk(np.array([0, 5]), np.zeros(2, bool)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_deltas_translation_invariant_scale_equivariant(seed, scale):
    m = generate_synthetic("cylinder", 300, seed=2)
    w = sample_walk(m, 50, np.random.default_rng(seed))
    base = encode_walk(m, w).deltas
    assert np.allclose(encode_walk(m.with_vertices(m.vertices + 5.0), w).deltas, base, atol=1e-12)
    assert np.allclose(encode_walk(m.with_vertices(m.vertices * scale), w).deltas, scale * base, atol=1e-12)


def test_walk_set():
    m = generate_synthetic("sphere", 1000, seed=0)
    s = sample_walk_set(m, 8, 50, np.random.default_rng(1))
    assert len(s) == 8
    assert len({int(w.vertex_ids[0]) for w, _ in s}) >= 6
    assert len(sample_walk_set(m, 1, 50, np.random.default_rng(1))) == 1
    again = sample_walk_set(m, 8, 50, np.random.default_rng(1))
    assert all(a == b for (a, _), (b, _) in zip(s, again))
    for w, seq in s:
        assert len(seq) == len(w) - 1


def test_walk_set_matches_spawned_children():
    m = icosphere(2)
    s = sample_walk_set(m, 4, 20, np.random.default_rng(9))
    children = np.random.default_rng(9).spawn(4)
    assert all(w == sample_walk(m, 20, c) for (w, _), c in zip(s, children))


def test_length_validation():
    with pytest.raises(ValueError):
        sample_walk(TRIANGLE, 1, np.random.default_rng(0))


def test_walk_cache_round_trip(tmp_path):
    recs = [CachedWalk("a/b.off", 12345678901234, (0, 1, 2, 1)), CachedWalk("ü", 0, tuple(range(400)))]
    p = tmp_path / "w.bin"
    write_walk_cache(p, recs)
    assert p.read_bytes()[:4] == b"AWLK"
    assert read_walk_cache(p) == recs


def test_walk_cache_bad_magic(tmp_path):
    p = tmp_path / "w.bin"
    p.write_bytes(b"NOPE\0\0\0\0")
    with pytest.raises(ParseError):
        read_walk_cache(p)
