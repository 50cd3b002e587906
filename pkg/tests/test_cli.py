import csv
import json
import subprocess
import sys

import pytest

from seqloc.cli import main, parse_t_list


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def dataset_dir(tmp_path):
    cfg = _write(tmp_path / "data.json", {"n_landmarks": 150, "n_frames": 24, "split_ratio": 0.5})
    out = tmp_path / "data"
    assert main(["gen", "--config", str(cfg), "--out", str(out)]) == 0
    return out


def test_gen_writes_layout(dataset_dir):
    names = sorted(p.name for p in dataset_dir.iterdir())
    assert names == ["features.bin", "manifest.json", "poses.csv"]


def test_gen_rejects_unknown_key(tmp_path):
    cfg = _write(tmp_path / "bad.json", {"n_landmark": 10})
    with pytest.raises(ValueError):
        main(["gen", "--config", str(cfg), "--out", str(tmp_path / "x")])


def test_train_then_eval(dataset_dir, tmp_path, capsys):
    cfg = _write(tmp_path / "train.json", {"epochs": 2, "hidden": 5, "batch_sequences": 2})
    ckpt, log = tmp_path / "model.ckpt", tmp_path / "train_log.csv"
    assert main(["train", "--data", str(dataset_dir), "--config", str(cfg), "--out", str(ckpt),
                 "--log", str(log)]) == 0
    assert ckpt.read_bytes()[:4] == b"SQLC"
    with open(log) as f:
        assert len(list(csv.reader(f))) == 1 + 4
    out = tmp_path / "eval"
    assert main(["eval", "--data", str(dataset_dir), "--ckpt", str(ckpt), "--split", "test",
                 "--out-dir", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["eval_report.json", "gates.csv", "path.csv",
                                                     "path.svg"]
    report = json.loads((out / "eval_report.json").read_text())
    assert report["n_frames"] == 12
    assert json.loads(capsys.readouterr().out.splitlines()[-1]) == report


def test_train_rejects_unknown_config_key(dataset_dir, tmp_path):
    cfg = _write(tmp_path / "train.json", {"epochs": 1, "hiden": 5})
    with pytest.raises(ValueError):
        main(["train", "--data", str(dataset_dir), "--config", str(cfg),
              "--out", str(tmp_path / "m.ckpt")])


def test_sweep_t(tmp_path):
    spec = _write(tmp_path / "spec.json", {
        "preset": "default",
        "data": {"n_landmarks": 100, "n_frames": 40, "split_ratio": 0.5},
        "train": {"epochs": 1, "hidden": 4},
    })
    out = tmp_path / "sweep_t.csv"
    assert main(["sweep-t", "--data-spec", str(spec), "--t", "2,5", "--out", str(out)]) == 0
    with open(out) as f:
        rows = list(csv.DictReader(f))
    assert [r["T"] for r in rows] == ["2", "5"]


def test_compare_fov(tmp_path):
    cfg = _write(tmp_path / "train.json", {"epochs": 1, "hidden": 4})
    out = tmp_path / "fov.csv"
    assert main(["compare-fov", "--scene-seed", "3", "--config", str(cfg), "--steps", "2",
                 "--out", str(out)]) == 0
    with open(out) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 9
    assert {r["variant"] for r in rows} == {"PoseNet-analog", "LSTM", "LSTM (Reg.)"}


def test_gradcheck_exit_code(capsys):
    assert main(["gradcheck", "--trials", "3"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_parse_t_list():
    assert parse_t_list("2,3,4,5,10") == [2, 3, 4, 5, 10]
    for bad in ("", "2,x", "0,3"):
        with pytest.raises(Exception):
            parse_t_list(bad)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "seqloc", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "sweep-t" in proc.stdout
