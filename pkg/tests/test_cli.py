import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from vita.cli import main
from vita.dense_maps import load_dmap
from vita.fusion import fuse
from vita.rasters import read_pgm

SMALL = {
    "data": {"preset": "mixed", "height": 24, "width": 24},
    "train": {"epochs": 3, "min_steps_per_epoch": 4, "batch_size": 2, "learning_rate": 2e-2},
}


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    assert run("gen-data", "--config", cfg, "--out", root / "data", "--count", 4) == 0
    assert run("train", "--config", cfg, "--data", root / "data", "--out", root / "model.vtkb") == 0
    return root, cfg


def test_gen_data_single_easy_scene(tmp_path):
    assert run("gen-data", "--out", tmp_path / "d", "--count", 1) == 0
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert manifest["count"] == 1 and manifest["scenes"][0]["preset"] == "easy"
    assert (tmp_path / "d" / "00000" / "rgb.ppm").exists()
    assert json.loads((tmp_path / "d" / "config.json").read_text())["data"]["preset"] == "easy"


def test_gen_data_byte_identical(tmp_path, workspace):
    _, cfg = workspace
    for name in ("a", "b"):
        assert run("gen-data", "--config", cfg, "--out", tmp_path / name, "--count", 2) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_bad_preset_exit_2_names_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"data": {"preset": "swamp"}}))
    assert run("gen-data", "--config", cfg, "--out", tmp_path / "d", "--count", 1) == 2
    assert "data.preset" in capsys.readouterr().err


def test_train_log_and_identity(workspace):
    root, _ = workspace
    rows = list(csv.DictReader((root / "model.csv").open()))
    assert len(rows) == SMALL["train"]["epochs"]
    assert [int(r["epoch"]) for r in rows] == [1, 2, 3]
    for r in rows:
        v = {k: float(x) for k, x in r.items()}
        sem = v["L_con"] + v["L_neu"] + v["L_agg"]
        assert abs(v["total"] - (sem + 2 * (v["L_geo"] + v["L_distill"]))) < 1e-9
    assert (root / "model.config.json").exists()


def test_train_checkpoint_byte_identical(workspace, tmp_path):
    root, cfg = workspace
    assert run("train", "--config", cfg, "--data", root / "data", "--out", tmp_path / "again.vtkb") == 0
    assert (tmp_path / "again.vtkb").read_bytes() == (root / "model.vtkb").read_bytes()
    assert (tmp_path / "again.csv").read_bytes() == (root / "model.csv").read_bytes()


def test_infer_all_maps(workspace, tmp_path):
    root, cfg = workspace
    img = root / "data" / "00000" / "rgb.ppm"
    out = tmp_path / "maps"
    assert run("infer", "--config", cfg, "--ckpt", root / "model.vtkb", "--image", img, "--all-maps", out) == 0
    dmaps = sorted(p.name for p in out.glob("*.dmap"))
    assert dmaps == sorted(f"{n}.dmap" for n in ("P", "C", "p_var", "R_slope", "R_elev", "T"))
    m = {p.stem: load_dmap(p) for p in out.glob("*.dmap")}
    # maps are stored as float32, so the identity holds to storage precision
    want = fuse(m["C"], m["P"], m["R_slope"], m["R_elev"])
    assert np.max(np.abs(m["T"] - want)) < 1e-6
    pgm = read_pgm(out / "T.pgm")
    assert np.array_equal(np.round(pgm * 255), np.round(255 * m["T"]))
    again = tmp_path / "maps2"
    assert run("infer", "--config", cfg, "--ckpt", root / "model.vtkb", "--image", img, "--all-maps", again) == 0
    for p in out.iterdir():
        assert p.read_bytes() == (again / p.name).read_bytes()


def test_infer_score_and_depth(workspace, tmp_path):
    root, cfg = workspace
    img = root / "data" / "00001" / "rgb.ppm"
    args = ("infer", "--config", cfg, "--ckpt", root / "model.vtkb", "--image", img)
    assert run(*args, "--score-out", tmp_path / "t.dmap", "--depth-out", tmp_path / "d.dmap") == 0
    assert (tmp_path / "t.pgm").exists()
    assert load_dmap(tmp_path / "d.dmap").shape == (24, 24)
    assert run(*args) == 2


def test_eval_report(workspace, tmp_path, capsys):
    root, cfg = workspace
    rep = tmp_path / "r.json"
    assert run("eval", "--config", cfg, "--ckpt", root / "model.vtkb", "--data", root / "data", "--report", rep) == 0
    d = json.loads(rep.read_text())
    assert d["tau"] == 0.5 and d["corruption"] is None
    assert set(d["counts"]) == {"tp", "fp", "fn", "tn"} and len(d["per_scene"]) == 4
    assert sum(d["counts"].values()) == 4 * 24 * 24
    assert capsys.readouterr().out == (tmp_path / "r.txt").read_text()

    noisy = tmp_path / "n.json"
    args = ("eval", "--config", cfg, "--ckpt", root / "model.vtkb", "--data", root / "data")
    assert run(*args, "--corrupt", "gaussian_noise:5", "--report", noisy) == 0
    dn = json.loads(noisy.read_text())
    assert dn["corruption"] == "gaussian_noise:5" and dn["counts"] != d["counts"]
    assert run(*args, "--tau", "0.3", "--report", tmp_path / "t.json") == 0
    assert json.loads((tmp_path / "t.json").read_text())["tau"] == 0.3
    assert run(*args, "--corrupt", "rain:2", "--report", tmp_path / "x.json") == 2
    assert run(*args, "--tau", "1.5", "--report", tmp_path / "x.json") == 2


def test_io_errors_exit_3(workspace, tmp_path):
    root, cfg = workspace
    assert run("train", "--config", cfg, "--data", tmp_path / "missing", "--out", tmp_path / "m.vtkb") == 3
    junk = tmp_path / "junk.vtkb"
    junk.write_bytes(b"not a checkpoint")
    img = root / "data" / "00000" / "rgb.ppm"
    assert run("infer", "--ckpt", junk, "--image", img, "--score-out", tmp_path / "t.dmap") == 3
    bad_img = tmp_path / "bad.ppm"
    bad_img.write_bytes(b"P9\n1 1\n255\n\x00")
    assert run("infer", "--ckpt", root / "model.vtkb", "--image", bad_img, "--score-out", tmp_path / "t.dmap") == 3


def test_non_finite_training_exit_4(workspace, tmp_path, capsys):
    root, _ = workspace
    cfg = tmp_path / "hot.json"
    cfg.write_text(json.dumps({**SMALL, "train": {**SMALL["train"], "learning_rate": 1e300}}))
    assert run("train", "--config", cfg, "--data", root / "data", "--out", tmp_path / "m.vtkb") == 4
    assert "non-finite" in capsys.readouterr().err
    assert not (tmp_path / "m.vtkb").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "vita", "gen-data", "--out", str(tmp_path / "d"), "--count", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "vita", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 2
