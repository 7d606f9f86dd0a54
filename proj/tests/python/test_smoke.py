import json
import math

import numpy as np
import pytest

import fakeaudio as fa


def blob_records(n_per_label=40, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    classes = ["dog_bark", "footstep", "gunshot", "keyboard", "moving_motor_vehicle", "rain", "sneeze_cough"]
    records = []
    for i in range(2 * n_per_label):
        fake = i >= n_per_label
        rec = {
            "clip_id": f"clip{i}",
            "sound_class": classes[i % 7],
            "label": int(fake),
            "values": (rng.normal(size=(4, dim)) + (1.5 if fake else -1.5)).astype(np.float32),
        }
        if fake:
            rec["generator_id"] = f"gen{i % 4}"
            rec["track"] = "A" if i % 4 < 2 else "B"
        records.append(rec)
    return records


def test_container_roundtrip(tmp_path):
    records = blob_records()
    path = tmp_path / "c.embd"
    fa.write_container(path, records)
    back = fa.read_container(path)
    assert len(back) == len(records)
    for a, b in zip(records, back):
        assert a["clip_id"] == b["clip_id"]
        assert a["label"] == b["label"]
        assert a.get("generator_id") == b["generator_id"]
        np.testing.assert_array_equal(a["values"], b["values"])


def test_container_errors(tmp_path):
    bad = tmp_path / "bad.embd"
    bad.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(fa.FormatError):
        fa.read_container(bad)
    rec = blob_records(1)[1]
    del rec["generator_id"]
    with pytest.raises(fa.ValidationError):
        fa.write_container(tmp_path / "x.embd", [rec])


def test_time_average():
    np.testing.assert_array_equal(fa.time_average(np.array([[1], [2], [3], [4]], dtype=np.float32)), [2.5])


def test_split(tmp_path):
    path = tmp_path / "c.embd"
    fa.write_container(path, blob_records(50))
    split = fa.split_container(path, seed=3)
    ids = split["train"] + split["validation"] + split["evaluation"]
    assert len(ids) == len(set(ids)) == 100
    assert split == fa.split_container(path, seed=3)


def test_labels_check(tmp_path):
    records = blob_records(5)
    path = tmp_path / "c.embd"
    fa.write_container(path, records)
    rows = ["clip_id,sound_class,label,generator_id,track"]
    for r in records:
        rows.append(f"{r['clip_id']},{r['sound_class']},{r['label']},{r.get('generator_id', '')},{r.get('track', '')}")
    labels = tmp_path / "labels.csv"
    labels.write_text("\n".join(rows) + "\n")
    fa.check_labels(path, labels)
    labels.write_text("\n".join(rows[:-1]) + "\n")
    with pytest.raises(fa.ValidationError):
        fa.check_labels(path, labels)


def test_model_and_loss():
    m = fa.Model(8, seed=1)
    assert m.layer_dims == [8, 512, 1024, 512, 1]
    assert m.weight(0).shape == (8, 512)
    assert np.abs(m.weight(0)).max() <= math.sqrt(6 / 8)
    y = m.predict(np.zeros((3, 8)))
    assert y.shape == (3,)
    assert np.all((y > 0) & (y < 1))
    assert fa.bce_loss(1, 1) == 0.0
    assert fa.bce_loss(1, 0.5) == pytest.approx(math.log(2), abs=1e-12)
    with pytest.raises(fa.ShapeError):
        m.predict(np.zeros((2, 7)))


def test_train_and_evaluate(tmp_path):
    rng = np.random.default_rng(4)
    x = np.vstack([rng.normal(-1, 0.5, (60, 8)), rng.normal(1, 0.5, (60, 8))])
    y = np.array([0] * 60 + [1] * 60, dtype=np.int32)
    model, run = fa.train_run(x, y, x, y, seed=2, epochs=10, batch_size=32)
    assert run["selected_epoch"] == 10
    report = fa.evaluate(model, x, y)
    assert report["overall_accuracy"] >= 0.95
    assert report["n_examples"] == 120
    path = tmp_path / "m.mlpc"
    model.save(path)
    np.testing.assert_array_equal(fa.Model.load(path).predict(x), model.predict(x))
    timing = fa.benchmark(model, x[0], runs=5)
    assert timing["percent_of_realtime"] == pytest.approx(100 * timing["mean_seconds"] / 4)


def test_statistics():
    r = fa.mann_whitney_u(list(range(10)), list(range(100, 110)))
    assert r["u"] == 0
    assert r["p_value"] == pytest.approx(2 / 184756, rel=1e-15)
    assert fa.mann_whitney_u([1, 2, 3], [1, 2, 3])["p_value"] == 1.0
    assert fa.pearson([1, 2, 3], [6, 4, 5]) == pytest.approx(-0.5)


def test_cli(tmp_path):
    path = tmp_path / "c.embd"
    fa.write_container(path, blob_records(30))
    manifest = tmp_path / "m.json"
    code, out, err = fa.run_cli(["split", "--container", str(path), "--seed", "1", "--out", str(manifest)])
    assert code == 0, err
    assert set(json.loads(manifest.read_text())) >= {"train", "validation", "evaluation", "seed"}
    code, _, _ = fa.run_cli(["split", "--container", str(tmp_path / "none.embd"), "--seed", "1", "--out", "x"])
    assert code == 2
