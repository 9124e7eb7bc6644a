import json
import subprocess
import sys

import numpy as np
import pytest

from vertfed import data as datamod
from vertfed.config import RunConfig, load_config, save_config
from vertfed.data import IngestError, ingest_csv, partition_vertical, synth_dataset
from vertfed.runner import read_model_file, run_experiment


def _write_csv(path, ds):
    datamod.dataset_to_csv(ds, path)
    return str(path)


def test_ingest_ionosphere_shaped(tmp_path):
    ds = synth_dataset(351, 34, seed=1)
    path = _write_csv(tmp_path / "iono.csv", ds)
    got = ingest_csv(path, label_column="label", id_column="id")
    assert got.X.shape == (351, 34)
    train, test = datamod.train_test_split(got, 288, 63, seed=0)
    assert train.X.shape[0] == 288 and test.X.shape[0] == 63
    assert got.X.min() >= 0.0 and got.X.max() <= 1.0
    assert set(np.unique(got.y)) <= {0.0, 1.0}


def test_ingest_phishing_shaped(tmp_path):
    ds = synth_dataset(1353, 10, seed=2)
    path = _write_csv(tmp_path / "phish.csv", ds)
    got = ingest_csv(path, label_column="label", id_column="id")
    assert got.X.shape == (1353, 10)
    train, _ = datamod.train_test_split(got, 1120, 233, seed=0)
    assert train.X.shape[0] == 1120


def test_ingest_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(IngestError):
        ingest_csv(str(empty), label_column="label")
    headers_only = tmp_path / "h.csv"
    headers_only.write_text("id,f0,label\n")
    with pytest.raises(IngestError):
        ingest_csv(str(headers_only), label_column="label")
    ragged = tmp_path / "r.csv"
    ragged.write_text("id,f0,label\na,1.0,1\nb,2.0\n")
    with pytest.raises(IngestError, match="expected 3 fields"):
        ingest_csv(str(ragged), label_column="label", id_column="id")
    missing = tmp_path / "m.csv"
    missing.write_text("id,f0,label\na,1.0,1\n")
    with pytest.raises(IngestError, match="missing label"):
        ingest_csv(str(missing), label_column="target", id_column="id")


def test_partition_ranges():
    ds = synth_dataset(10, 4, seed=3)
    shards, ranges, d_total = partition_vertical(ds, 2, active_party=1, bias=False)
    assert ranges == [(0, 2), (2, 4)]
    assert d_total == 4
    ds5 = synth_dataset(10, 5, seed=3)
    shards5, ranges5, _ = partition_vertical(ds5, 2, active_party=1, bias=False)
    assert [hi - lo for lo, hi in ranges5] == [3, 2]


def test_partition_bias_and_labels_to_active():
    ds = synth_dataset(12, 4, seed=4)
    shards, ranges, d_total = partition_vertical(ds, 2, active_party=2, bias=True)
    assert d_total == 5
    assert [s.is_active for s in shards] == [False, True]
    active = shards[1]
    assert np.all(active.features[:, 0] == 1.0)  # bias column
    assert ranges == [(0, 2), (2, 5)]
    assert all(s.ids is not None for s in shards)
    aug = datamod.augment(ds.X, 2, active_party=2, bias=True)
    joined = np.hstack([shards[0].features, shards[1].features])
    assert np.allclose(aug, joined)


def test_partition_too_few_features():
    ds = synth_dataset(8, 2, seed=5)
    with pytest.raises(IngestError):
        partition_vertical(ds, 3)


def test_config_roundtrip(tmp_path):
    cfg = RunConfig(kind="linear_svm", parties=3, scale=10**6, alpha=0.125,
                    per_batch_update=False, resolution="clk")
    path = tmp_path / "run.ini"
    save_config(cfg, path)
    back = load_config(path)
    assert back == cfg
    text = path.read_text()
    assert "[model]" in text and "kind = linear_svm" in text


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(resolution="magic")
    with pytest.raises(ValueError):
        RunConfig(parties=2, active_party=3)


def _mini_cfg(out=None):
    return RunConfig(
        kind="logistic", parties=2, epochs=2, batch_size=4, batches_per_epoch=2,
        synthetic_rows=50, synthetic_features=5, train_count=36, test_count=14,
        alpha=0.4, scale=1000, group_bits=48, table_bound=1 << 13, resolution="none",
    )


def test_run_outputs_deterministic(tmp_path):
    cfg = _mini_cfg()
    run_experiment(cfg, out_dir=str(tmp_path / "a"))
    run_experiment(cfg, out_dir=str(tmp_path / "b"))
    for name in ("metrics.jsonl", "model.txt", "summary.json"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        if name == "summary.json":
            da, db = json.loads(a), json.loads(b)
            da.pop("elapsed_s"), db.pop("elapsed_s")
            assert da == db
        else:
            assert a == b, name


def test_model_file_format(tmp_path):
    cfg = _mini_cfg()
    res = run_experiment(cfg, out_dir=str(tmp_path))
    fields, w = read_model_file(tmp_path / "model.txt")
    assert fields["kind"] == "logistic"
    assert int(fields["d"]) == len(res.w) == len(w)
    assert int(fields["scale"]) == 1000
    assert np.array_equal(w, res.w)
    metrics = [json.loads(line) for line in (tmp_path / "metrics.jsonl").read_text().splitlines()]
    epochs = [m for m in metrics if m.get("phase") == "epoch"]
    assert len(epochs) == cfg.epochs
    assert all("test_accuracy" in m for m in epochs)


def test_cli_run_verify_and_oracle(tmp_path):
    cfg = _mini_cfg()
    cfg_path = tmp_path / "cfg.ini"
    save_config(cfg, cfg_path)
    out = subprocess.run(
        [sys.executable, "-m", "vertfed.cli", "run", "-c", str(cfg_path),
         "-o", str(tmp_path / "out")],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
    payload = json.loads(out.stdout)
    assert payload["party_to_party_messages"] == 0
    assert (tmp_path / "out" / "metrics.jsonl").exists()

    ver = subprocess.run(
        [sys.executable, "-m", "vertfed.cli", "verify", "-c", str(cfg_path),
         "--tolerance", "0.002"],
        capture_output=True, text=True,
    )
    assert ver.returncode == 0, ver.stderr
    rep = json.loads(ver.stdout)
    assert rep["max_deviation"] <= 0.002

    orc = subprocess.run(
        [sys.executable, "-m", "vertfed.cli", "oracle", "-c", str(cfg_path)],
        capture_output=True, text=True,
    )
    assert orc.returncode == 0, orc.stderr
    assert "test_accuracy" in json.loads(orc.stdout)
