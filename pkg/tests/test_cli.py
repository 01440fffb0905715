import csv
import json

import pytest

from sandgrove.cli import main


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv("SANDGROVE_SEED", raising=False)


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_verify_subset(capsys):
    assert main(["verify", "--only", "bijection", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "roundtrip" in out


def test_verify_report(tmp_path, capsys):
    rep = tmp_path / "r.json"
    assert main(["verify", "--only", "algebra", "--report", str(rep)]) == 0
    data = json.loads(rep.read_text())
    assert data["passed"] and data["schema"] == 1


def test_verify_corrupt_graph(tmp_path, capsys):
    p = tmp_path / "g.json"
    p.write_text("not json")
    assert main(["verify", "--graph", str(p)]) == 2
    assert "error" in capsys.readouterr().err


def test_seed_required(capsys):
    assert main(["sample", "--family", "zd", "--d", "2", "--side", "5"]) == 2


def test_seed_from_env(monkeypatch, capsys):
    monkeypatch.setenv("SANDGROVE_SEED", "4")
    assert main(["sample", "--family", "zd", "--d", "2", "--side", "5"]) == 0
    a = _json(capsys)
    assert main(["sample", "--family", "zd", "--d", "2", "--side", "5", "--seed", "4"]) == 0
    assert _json(capsys)["mass"] == a["mass"]


def test_heights_outputs(tmp_path, capsys):
    out = tmp_path / "h.csv"
    args = ["heights", "--family", "zd", "--d", "2", "--side", "9", "--samples", "500", "--seed", "7", "--out", str(out)]
    assert main(args) == 0
    summary = _json(capsys)
    assert summary["schema"] == 1 and len(summary["config_hash"]) == 16
    rows = list(csv.DictReader(out.open()))
    assert sum(int(r["count"]) for r in rows) == 500
    assert (tmp_path / "h.json").exists()
    assert main(args) == 0
    assert _json(capsys) == summary


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"family": "tree", "d": 3, "depth": 5, "samples": 200, "seed": 1}))
    assert main(["heights", "--config", str(cfg)]) == 0
    a = _json(capsys)
    assert main(["heights", "--config", str(cfg), "--seed", "2"]) == 0
    b = _json(capsys)
    assert a["config_hash"] != b["config_hash"]


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("[1, 2]")
    assert main(["heights", "--config", str(cfg), "--seed", "1"]) == 2


def test_missing_family(capsys):
    assert main(["heights", "--samples", "10", "--seed", "1"]) == 2


def test_tree_exact(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["tree-exact", "--degree", "3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["exact_value"] for r in rows] == ["1/12", "1/3", "7/12"]
    assert main(["tree-exact", "--degree", "3", "--window", "o+1", "--depth", "6"]) == 0
    assert "exact_value" in capsys.readouterr().out


def test_strip_strict(capsys):
    code = main(["strip", "--samples", "3000", "--seed", "7", "--strict"])
    summary = _json(capsys)
    assert summary["diverged"] and code == 0


def test_invariance_strict_exit(capsys):
    code = main(
        ["invariance", "--family", "tree", "--d", "3", "--n", "8", "--samples", "500", "--seed", "1", "--strict",
         "--significance", "0.999999"]
    )
    assert code == 3


def test_avalanche_and_coupling(tmp_path, capsys):
    stem = tmp_path / "av"
    assert main(["avalanche", "--family", "tree", "--d", "3", "--depth", "8", "--samples", "500", "--seed", "1", "--out", str(stem)]) == 0
    summary = _json(capsys)
    assert "ccdf_slope" in summary
    assert (tmp_path / "av.csv").read_text().startswith("seed,site,topplings")
    assert main(["coupling", "--radii", "4,8", "--seeds", "10", "--seed", "1"]) == 0
    assert 0 <= _json(capsys)["agreement"] <= 1


def test_decompose_and_highdim(capsys):
    base = ["--family", "zd", "--d", "5", "--side", "5", "--samples", "100", "--seed", "2"]
    assert main(["decompose", *base]) == 0
    assert "k_counts" in _json(capsys)
    assert main(["highdim", *base, "--mode", "true", "--strict"]) == 0
    assert _json(capsys)["mismatches_when_separated"] == 0
