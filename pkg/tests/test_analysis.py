import math

import numpy as np
import pytest

from attwalk.analysis import attentiveness_row, euclidean_length, mean_turning_angle, rows_csv, summarize
from attwalk.mesh import Mesh
from attwalk.walks import walk_from_ids


def square():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    return Mesh(v, np.array([[0, 1, 2], [0, 2, 3]]), name="sq")


def test_length_and_turning():
    m = square()
    w = walk_from_ids(m, [0, 1, 2, 3])
    assert euclidean_length(m, w) == pytest.approx(3.0)
    assert mean_turning_angle(m, w) == pytest.approx(math.pi / 2)
    straight_back = walk_from_ids(m, [0, 1, 0])
    assert mean_turning_angle(m, straight_back) == pytest.approx(math.pi)
    assert mean_turning_angle(m, walk_from_ids(m, [0, 2])) == 0.0


def test_row_picks_extremes_with_ties_to_lowest_index():
    m = square()
    walks = [walk_from_ids(m, ids) for ids in ([0, 1], [0, 2], [1, 2, 3])]
    row = attentiveness_row(m, walks, [0.4, 0.4, 0.2])
    assert row.top_contribution == 0.4 and row.top_length == pytest.approx(1.0)
    assert row.bottom_contribution == 0.2 and row.bottom_length == pytest.approx(2.0)


def test_summary_and_csv():
    m = square()
    walks = [walk_from_ids(m, [0, 1, 2]), walk_from_ids(m, [0, 1])]
    rows = [attentiveness_row(m, walks, [0.7, 0.3])] * 2
    s = summarize(rows)
    assert s["meshes"] == 2 and s["length_excess"] == pytest.approx(1.0)
    assert s["mean_top_contribution"] == pytest.approx(0.7)
    text = rows_csv(rows)
    assert text.splitlines()[0].startswith("mesh_id,") and len(text.splitlines()) == 3
