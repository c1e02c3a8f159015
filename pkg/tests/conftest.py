import numpy as np
import pytest

from attwalk.mesh import normalize_unit_cube
from attwalk.synthetic import CATEGORIES, generate_synthetic
from attwalk.trainer import TrainConfig

TINY_DIMS = (8, 8, 8, 8, 16)


def tiny_meshes(per_sub: int = 2, resolution: int = 200, seed: int = 0):
    out = []
    for c in CATEGORIES:
        for v in (0, 1):
            for k in range(per_sub):
                out.append(normalize_unit_cube(generate_synthetic(c, resolution, seed * 1000 + 10 * k + v, variant=v)))
    return out


def tiny_config(**kw):
    base = dict(phase1_steps=4, phase2_steps=3, cycle_len=10, lr_max=1e-3, batch_walks=16,
                walks_per_mesh=4, scales=(200,), dims=TINY_DIMS, walk_length=20)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def meshes():
    return tiny_meshes()


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion

CRITERIA: dict[str, str] = {}
_ITEM_CRITERION: dict[str, str] = {}
_OUTCOMES: dict[str, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion a test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            key, title = mark.args
            CRITERIA.setdefault(key, title)
            _ITEM_CRITERION[item.nodeid] = key


def pytest_runtest_logreport(report):
    key = _ITEM_CRITERION.get(report.nodeid)
    if key is None:
        return
    if report.when == "call":
        _OUTCOMES.setdefault(key, []).append(report.passed)
    elif report.failed:  # setup or teardown error
        _OUTCOMES.setdefault(key, []).append(False)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key, title in sorted(CRITERIA.items(), key=lambda kv: (not kv[0].isdigit(), int(kv[0]) if kv[0].isdigit() else 0, kv[0])):
        results = _OUTCOMES.get(key)
        if not results:
            status = "SKIP"
        else:
            status = "PASS" if all(results) else "FAIL"
        tr.write_line(f"{status}  criterion {key:<3} {title}")
