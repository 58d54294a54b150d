"""Smoke tests for the Python bindings."""

import json
import math

import pytest

temporal_heads = pytest.importorskip("temporal_heads")


def test_sample_frames_endpoints():
    idx = temporal_heads.sample_frames(49, 25)
    assert idx == [2 * j for j in range(25)]
    assert temporal_heads.sample_frames(25, 25) == list(range(25))


def test_partition_balanced():
    assert temporal_heads.partition(25, 3) == [(0, 9), (9, 17), (17, 25)]


def test_matmul_identity():
    eye = [[1.0, 0.0], [0.0, 1.0]]
    m = [[1.0, 2.0], [3.0, 4.0]]
    assert temporal_heads.matmul(eye, m) == m


def test_softmax_rows_are_distributions():
    rows = temporal_heads.softmax([[0.0, math.log(3.0)], [5.0, 5.0]])
    assert rows[0][0] == pytest.approx(0.25)
    assert rows[0][1] == pytest.approx(0.75)
    assert rows[1][0] == pytest.approx(0.5)
    for row in rows:
        assert sum(row) == pytest.approx(1.0, abs=1e-9)


def test_ensemble_mean():
    mean = temporal_heads.ensemble_mean([[1.0, 0.0], [0.0, 1.0]])
    assert mean == [0.5, 0.5]


def test_catalogs():
    tslstm = temporal_heads.catalog("tslstm")
    tconv = temporal_heads.catalog("tconv")
    assert len(tslstm) == 28
    assert len(tconv) == 39
    ids = {vid for vid, _ in tslstm}
    assert "ts3-max-lstm512" in ids
    assert "ts1-lstm512" in ids


def test_grad_check_variant():
    report = temporal_heads.grad_check("tslstm", "ts3-max-lstm512")
    assert report["max_rel_error"] < 1e-4


def test_synthetic_train_round_trip(tmp_path):
    spec = temporal_heads.default_synth_spec()
    spec.update(train_per_class=12, test_per_class=4, feature_dim=16, noise_sigma=0.05)
    manifest = temporal_heads.generate_synthetic(spec, tmp_path / "synth")
    config = {
        "family": "tslstm",
        "model": {"num_segments": 3, "pool": "max", "lstm_widths": [16]},
        "train": {"lr": 1e-3, "max_epochs": 8, "seed": 3},
    }
    report = temporal_heads.train(config, manifest)
    assert len(report["train_loss"]) == 8
    assert report["train_loss"][-1] < report["train_loss"][0]
    assert 0.0 <= report["eval_accuracy"][-1] <= 1.0
