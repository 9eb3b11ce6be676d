import csv
import json

import pytest

from lanekit.cli import main
from lanekit.datasets import load_ivecs


@pytest.fixture
def data_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("LANEKIT_DATA", str(tmp_path / "data"))
    assert main(["gen", "--N", "1500", "--n-queries", "12", "--clusters", "8", "--dataset", "tiny"]) == 0
    return tmp_path


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_gen_is_reproducible(data_dir, capsys, tmp_path):
    first = json.loads((data_dir / "data" / "tiny" / "benchmark.json").read_text())["checksums"]
    capsys.readouterr()
    assert main(["gen", "--N", "1500", "--n-queries", "12", "--clusters", "8", "--out", str(tmp_path / "again")]) == 0
    again = json.loads(capsys.readouterr().out)["checksums"]
    assert first == again


def test_build_and_groundtruth(data_dir, capsys):
    out = data_dir / "res"
    assert main(["build", "--dataset", "tiny", "--index", "hnsw", "--seed", "5", "--out", str(out)]) == 0
    log = json.loads((out / "indexes" / "tiny-hnsw-seed5.build.json").read_text())
    assert log["family"] == "hnsw" and log["N"] == 1500 and log["seed"] == 5
    assert (out / "indexes" / "tiny-hnsw-seed5.lkx").exists()
    assert main(["groundtruth", "--dataset", "tiny", "--out", str(out)]) == 0
    gt = load_ivecs(out / "tiny-groundtruth-100.ivecs")
    assert gt.shape == (12, 100)


def test_build_bad_param(data_dir, capsys):
    rc = main(["build", "--dataset", "tiny", "--index", "ivf", "--param", "colour=3", "--out", str(data_dir / "r")])
    assert rc == 2
    assert "bad index parameter" in capsys.readouterr().err


def test_sweep_csv(data_dir, capsys):
    out = data_dir / "res"
    assert main(["sweep", "--dataset", "tiny", "--seed", "42", "--out", str(out)]) == 0
    rows = _read_csv(out / "sweep.csv")
    assert list(rows[0]) == ["dataset", "index", "M", "k_lane", "alpha", "seed", "metric", "value"]
    recall = {r["alpha"]: float(r["value"]) for r in rows if r["metric"] == "recall@10"}
    overlap = {r["alpha"]: float(r["value"]) for r in rows if r["metric"] == "overlap"}
    assert recall["1"] > recall["0"]
    assert recall["1"] == recall["single"]
    assert overlap["0"] == overlap["naive"] == 1.0 and overlap["1"] == 0.0
    assert (out / "sweep_outcomes.jsonl").read_text().count("\n") == 12 * 7


def test_manifest_driven_poolsize_with_skips(data_dir, capsys):
    m = data_dir / "m.json"
    m.write_text(json.dumps({"dataset": "tiny", "seeds": [7], "pool_ratios": [0.1, 0.9, 1.0, 1.5]}))
    out = data_dir / "res"
    assert main(["poolsize", "--manifest", str(m), "--out", str(out)]) == 0
    rows = _read_csv(out / "poolsize.csv")
    assert [r["pool_ratio"] for r in rows] == ["0.9", "1", "1.5"]
    assert rows[0]["union_min"] == rows[0]["union_max"] == rows[0]["K_pool"] == "58"
    assert "skipped" in capsys.readouterr().err
    assert (out / "poolsize_skipped.txt").exists()


def test_lanescale(data_dir):
    out = data_dir / "res"
    assert main(["lanescale", "--dataset", "tiny", "--seed", "1", "--out", str(out)]) == 0
    rows = _read_csv(out / "lanescale.csv")
    assert {r["M"] for r in rows} == {"2", "4", "8"}
    assert {r["alpha"] for r in rows} == {"0", "1", "naive", "single"}


def test_rho0_and_recommend(data_dir, capsys):
    args = ["--dataset", "tiny", "--seed", "1", "--out", str(data_dir / "res"), "--sample", "5"]
    assert main(["rho0", *args]) == 0
    assert json.loads(capsys.readouterr().out)["rho0"] == 1.0
    assert main(["recommend", *args]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["recommended_alpha"] == 1.0 and doc["predicted_gain"] == 4.0
    assert main(["recommend", *args, "--mode", "jittered"]) == 0
    assert main(["recommend", *args, "--mode", "bogus"]) == 2


def test_microbench(tmp_path, capsys):
    assert main(["microbench", "--trials", "50", "--k-totals", "16,32", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "slope=" in text and "p95/p50" in text
    doc = json.loads((tmp_path / "microbench.json").read_text())
    assert [r["k_total"] for r in doc["rows"]] == [16, 32]


def test_missing_inputs_exit_nonzero(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LANEKIT_DATA", str(tmp_path))
    assert main(["sweep", "--manifest", str(tmp_path / "none.json")]) == 2
    assert main(["sweep", "--dataset", "nowhere"]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate"])
