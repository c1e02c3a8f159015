import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from plyfile import PlyData

from attwalk.checkpoint import Checkpoint
from attwalk.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, blob_hash, main, walk_table

TINY_CFG = """
dims = 8, 8, 8, 8, 16
phase1_steps = 6
phase2_steps = 4
cycle_len = 10
lr_max = 1e-3
batch_walks = 16
walks_per_mesh = 4
scales = 150
walk_length = 20
"""


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, out = root / "data", root / "run"
    cfg = root / "tiny.txt"
    cfg.write_text(TINY_CFG)
    assert main(["gen-data", "--out", str(data), "--per-class", "3", "--resolutions", "150"]) == EXIT_OK
    assert main(["train", "--data", str(data), "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    return root, data, out, cfg


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_train_outputs(run):
    root, data, out, _ = run
    for name in ("phase1/tensors.bin", "phase1/meta.json", "phase2/tensors.bin", "phase2/meta.json",
                 "train_log.csv", "config.txt", "run_manifest.json"):
        assert (out / name).is_file(), name
    log = read_csv(out / "train_log.csv")
    assert list(log[0]) == ["step", "phase", "lr", "loss", "accuracy"] and len(log) == 10
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "train" and manifest["seed"] == 0
    manifest_csv = data / "manifest.csv"
    assert manifest["inputs"][str(manifest_csv)] == blob_hash(manifest_csv.read_bytes())
    assert len(manifest["input_hash"]) == 64
    assert Checkpoint.load(out / "phase2").phase == "2"


def test_blob_hash_matches_git():
    assert blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_eval_deterministic(run, tmp_path):
    _, data, out, _ = run
    args = ["eval", "--data", str(data), "--ckpt", str(out), "--walks", "1,2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    a = (tmp_path / "a" / "metrics.csv").read_text()
    assert a == (tmp_path / "b" / "metrics.csv").read_text()
    keys = [r["metric"] for r in read_csv(tmp_path / "a" / "metrics.csv")]
    assert sorted(keys) == ["walks=1/class_acc", "walks=1/instance_acc", "walks=2/class_acc", "walks=2/instance_acc"]
    assert (tmp_path / "a" / "run_manifest.json").is_file()


def test_eval_retrieval_mode(run, tmp_path):
    _, data, out, _ = run
    assert main(["eval", "--data", str(data), "--ckpt", str(out / "phase2"), "--mode", "retrieve",
                 "--out", str(tmp_path)]) == EXIT_OK
    keys = {r["metric"] for r in read_csv(tmp_path / "metrics.csv")}
    assert {"microAll/P@N", "macroAll/mAP", "microAll/NDCG", "macroAll/F1@N"} <= keys
    lists = read_csv(tmp_path / "ranked_lists.csv")
    assert lists and all(r["query"] != r["id"] for r in lists)


def test_inspect_walks(run, tmp_path):
    _, data, out, _ = run
    mesh = data / "150" / "torus_0_000.off"
    assert main(["inspect-walks", "--mesh", str(mesh), "--ckpt", str(out), "--walks", "6",
                 "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "walks.csv")
    assert len(rows) == 6
    assert abs(sum(float(r["contribution"]) for r in rows) - 1.0) <= 1e-6
    assert sorted(int(r["rank"]) for r in rows) == list(range(1, 7))
    ply = PlyData.read(str(tmp_path / "overlay.ply"))
    text = mesh.read_text().split()
    n_vertices = int(text[1])
    assert ply["vertex"].count == n_vertices and len(ply["vertex"]["red"]) == n_vertices
    assert (tmp_path / "run_manifest.json").is_file()


def test_inspect_single_walk(run, tmp_path):
    _, data, out, _ = run
    assert main(["inspect-walks", "--mesh", str(data / "150" / "cone_1_002.off"), "--ckpt", str(out),
                 "--walks", "1", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "walks.csv")
    assert len(rows) == 1 and float(rows[0]["contribution"]) == 1.0 and rows[0]["rank"] == "1"


def test_walk_table_ranks():
    assert walk_table("m", [0.2, 0.5, 0.3]) == [("m", 0, 0.2, 3), ("m", 1, 0.5, 1), ("m", 2, 0.3, 2)]


def test_attention_stats(run, tmp_path):
    _, data, out, _ = run
    assert main(["attention-stats", "--data", str(data), "--ckpt", str(out), "--walks", "4",
                 "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "attentiveness_summary.json").read_text())
    assert summary["meshes"] == 10
    assert len(read_csv(tmp_path / "attentiveness.csv")) == 10


def test_phase2_from_saved_phase1(run, tmp_path):
    _, data, out, cfg = run
    assert main(["train", "--data", str(data), "--config", str(cfg), "--phase", "2",
                 "--ckpt", str(out / "phase1"), "--out", str(tmp_path)]) == EXIT_OK
    a, b = Checkpoint.load(out / "phase2"), Checkpoint.load(tmp_path / "phase2")
    assert all(np.array_equal(a.tensors[k], b.tensors[k]) for k in a.tensors)


@pytest.mark.parametrize("argv", [
    ["gen-data", "--out", "{tmp}/d", "--per-class", "0"],
    ["train", "--data", "{data}", "--phase", "2", "--out", "{tmp}/x"],
    ["train", "--data", "{data}", "--out", "{tmp}/x", "--bogus-flag"],
    ["train", "--data", "{tmp}/none", "--out", "{tmp}/x"],
    ["train", "--data", "{data}", "--out", "{tmp}/x", "--config", "{tmp}/missing.txt"],
    ["eval", "--data", "{data}", "--ckpt", "{tmp}/nockpt"],
    ["eval", "--data", "{data}", "--ckpt", "{out}", "--walks", "a,b"],
    ["inspect-walks", "--mesh", "{tmp}/none.off", "--ckpt", "{out}", "--out", "{tmp}/i"],
    ["attention-stats", "--data", "{data}", "--ckpt", "{out}", "--walks", "1", "--out", "{tmp}/s"],
    [],
])
def test_usage_errors_exit_2(run, tmp_path, argv):
    _, data, out, _ = run
    argv = [a.format(tmp=tmp_path, data=data, out=out) for a in argv]
    assert main(argv) == EXIT_USAGE


def test_bad_config_key_exit_2(run, tmp_path):
    _, data, _, _ = run
    cfg = tmp_path / "c.txt"
    cfg.write_text("nonsense = 1\n")
    assert main(["train", "--data", str(data), "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_threads_env(run, tmp_path, monkeypatch):
    _, data, out, _ = run
    monkeypatch.setenv("ATTWALK_THREADS", "zero")
    assert main(["eval", "--data", str(data), "--ckpt", str(out), "--out", str(tmp_path)]) == EXIT_USAGE
    monkeypatch.setenv("ATTWALK_THREADS", "1")
    assert main(["eval", "--data", str(data), "--ckpt", str(out), "--out", str(tmp_path)]) == EXIT_OK


def test_nan_exit_3(run, tmp_path):
    _, data, _, cfg = run
    bad = tmp_path / "bad.txt"
    bad.write_text(cfg.read_text() + "lr_max = 1e300\nphase1_steps = 30\n")
    assert main(["train", "--data", str(data), "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_NUMERIC
    dump = json.loads((tmp_path / "o" / "nan_dump.json").read_text())
    assert "error" in dump and dump["config"]["lr_max"] == 1e300


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "attwalk", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "gen-data" in res.stdout
    res = subprocess.run([sys.executable, "-m", "attwalk", "frobnicate"], capture_output=True, text=True)
    assert res.returncode == 2
