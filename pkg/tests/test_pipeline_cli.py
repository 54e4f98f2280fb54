import json

import numpy as np
import pytest

from filament_lab import io
from filament_lab import pipeline as P
from filament_lab.cli import main

SMALL = ["--set", "sampler.n=800"]


# -- configuration ------------------------------------------------------------


def test_merge_config_defaults_and_overrides():
    cfg = P.merge_config({"noise": {"sigma": 0.1}})
    assert cfg["noise"]["sigma"] == 0.1
    assert cfg["noise"]["beta"] == P.DEFAULTS["noise"]["beta"]


@pytest.mark.parametrize("bad", [
    {"nosuch": {}},
    {"noise": {"nosuch": 1}},
    {"noise": {"sigma": "wide"}},
    {"extract": {"relax": 1}},
])
def test_merge_config_rejects(bad):
    with pytest.raises(P.ConfigError):
        P.merge_config(bad)


def test_cli_unknown_key_exit_2(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--set", "noise.width=3"]) == 2
    assert "invalid config" in capsys.readouterr().err


def test_cli_malformed_override_exit_2(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--set", "sigma=3"]) == 2


def test_cli_unreadable_config_exit_2(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text("{not json")
    assert main(["simulate", "--out", str(tmp_path), "--config", str(bad)]) == 2


def test_cli_stage_error_exit_3(tmp_path, capsys):
    io.write_points(tmp_path / "few.csv", [[0.0, 0.0], [1.0, 1.0]])
    assert main(["estimate-edt", str(tmp_path / "few.csv"), "--out", str(tmp_path)]) == 3
    assert "stage 'support'" in capsys.readouterr().err


# -- subcommands ----------------------------------------------------------------


def test_simulate_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--out", str(a), "--seed", "4", *SMALL]) == 0
    assert main(["simulate", "--out", str(b), "--seed", "4", *SMALL]) == 0
    assert (a / "points.csv").read_bytes() == (b / "points.csv").read_bytes()
    pts, labels = io.read_points(a / "points.csv")
    assert len(pts) == 800 and np.all(labels == 0)


def test_simulate_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"noise": {"sigma": 0.1}, "sampler": {"n": 300}}))
    assert main(["simulate", "--out", str(tmp_path), "--config", str(cfg)]) == 0
    written = io.read_json(tmp_path / "config.json")
    assert written["noise"]["sigma"] == 0.1
    pts, _ = io.read_points(tmp_path / "points.csv")
    assert np.abs(np.hypot(*pts.T) - 1).max() <= 0.1 + 1e-12


def test_estimate_edt_region_reverifies(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), *SMALL]) == 0
    assert main(["estimate-edt", str(tmp_path / "points.csv"), "--out", str(tmp_path), *SMALL]) == 0
    region, comp = io.read_points(tmp_path / "edt_region.csv")
    meta = io.read_json(tmp_path / "edt.json")
    assert len(region) > 0 and np.all(comp == 0)
    pts, _ = io.read_points(tmp_path / "points.csv")
    sup = P.estimate_support(pts, P.merge_config({"sampler": {"n": 800}}))
    assert sup.epsilon == meta["epsilon"]
    thr = meta["components"][0]["threshold"]
    assert np.all(sup.contains(region))
    assert np.all(sup.boundary_distance(region) >= thr - 1e-12)


def test_extract_and_evaluate(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), *SMALL]) == 0
    assert main(["extract", str(tmp_path / "points.csv"), "--out", str(tmp_path), "--set", "extract.mode=\"closed\""]) == 0
    meta = io.read_json(tmp_path / "extract.json")
    assert meta["curves"][0]["topology"] == "closed"
    capsys.readouterr()
    assert main(["evaluate", str(tmp_path / "curve_0.csv"), "--out", str(tmp_path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["dh"] <= 4 * meta["epsilon"]


def test_declutter_writes_confusion(tmp_path):
    args = ["--set", "sampler.eta=0.7", *SMALL]
    assert main(["simulate", "--out", str(tmp_path), *args]) == 0
    assert main(["declutter", str(tmp_path / "points.csv"), "--out", str(tmp_path)]) == 0
    cm = io.read_json(tmp_path / "confusion.json")
    assert cm["tp"] + cm["fn"] + cm["fp"] + cm["tn"] == 800
    t = io.read_table(tmp_path / "classified.csv")
    kept, _ = io.read_points(tmp_path / "decluttered.csv")
    assert len(kept) == int(t["predicted"].sum())


def test_render(tmp_path):
    io.write_points(tmp_path / "p.csv", np.random.default_rng(0).normal(size=(5, 2)))
    assert main(["render", "--points", str(tmp_path / "p.csv"), "--out", str(tmp_path), "--name", "x.svg"]) == 0
    assert (tmp_path / "x.svg").read_text().count("<circle") == 5
    assert main(["render", "--out", str(tmp_path)]) == 3


def test_reproduce_example_one(tmp_path):
    assert main(["reproduce-example", "1", "--out", str(tmp_path)]) == 0
    for name in ("points.csv", "summary.json", "truth.svg", "data.svg", "decluttered.svg", "edt.svg",
                 "medial.svg", "extracted.svg"):
        assert (tmp_path / name).exists(), name
    s = io.read_json(tmp_path / "summary.json")
    pts, labels = io.read_points(tmp_path / "points.csv")
    assert len(pts) == s["n"] == 1500
    assert np.sum(labels == 0) == 500 and np.sum(labels == 1) == 500 and np.sum(labels == -1) == 500
    assert s["components"] == 2
    assert s["confusion"]["filament_recall"] >= 0.95
    assert s["evaluation"]["edt"]["max_dh"] <= 4 * s["epsilon"]
