import json

import numpy as np
import pytest
from PIL import Image

from facl.data import DatasetManifest, Workspace, ingest_dataset, load_split
from facl.errors import ConfigurationError, InvalidInputError
from facl.runs import MetricsWriter, create_run_dir, read_metrics


def _write_folder(root, n_classes=10, n_per_class=100, size=8):
    rng = np.random.default_rng(0)
    for c in range(n_classes):
        d = root / f"class{c}"
        d.mkdir(parents=True)
        for i in range(n_per_class):
            Image.fromarray(rng.integers(0, 256, (size, size, 3), dtype=np.uint8)).save(d / f"{i}.png")


def test_ingest_counts_and_disjoint_splits(tmp_path):
    _write_folder(tmp_path / "ds")
    m = ingest_dataset(tmp_path / "ds", "toy", resolution=8)
    assert m.num_classes == 10 and len(m) == 1000
    train = {r for r, _ in m.splits["train"]}
    test = {r for r, _ in m.splits["test"]}
    assert not train & test and 100 < len(test) < 300
    x, y = load_split(m, "train")
    assert x.shape == (len(train), 3, 8, 8) and x.dtype == np.uint8
    assert set(np.unique(y)) == set(range(10))


def test_reingest_same_checksum(tmp_path):
    _write_folder(tmp_path / "ds", 3, 5)
    a = ingest_dataset(tmp_path / "ds", resolution=8)
    b = ingest_dataset(tmp_path / "ds", resolution=8)
    assert a.checksum == b.checksum
    (tmp_path / "ds" / "class0" / "0.png").unlink()
    assert ingest_dataset(tmp_path / "ds", resolution=8).checksum != a.checksum


def test_empty_class_named_in_error(tmp_path):
    _write_folder(tmp_path / "ds", 2, 3)
    (tmp_path / "ds" / "lonely").mkdir()
    with pytest.raises(InvalidInputError, match="lonely"):
        ingest_dataset(tmp_path / "ds")


def test_corrupt_image_quarantined(tmp_path):
    _write_folder(tmp_path / "ds", 2, 3)
    (tmp_path / "ds" / "class1" / "broken.png").write_bytes(b"not an image")
    m = ingest_dataset(tmp_path / "ds", resolution=8)
    assert [q["path"] for q in m.quarantined] == ["class1/broken.png"]
    assert len(m) == 6


def test_split_layout_resizes(tmp_path):
    for split in ("train", "test"):
        _write_folder(tmp_path / "ds" / split, 2, 2, size=12)
    m = ingest_dataset(tmp_path / "ds", "s", resolution=8)
    assert m.layout == "split" and len(m.splits["test"]) == 4
    assert load_split(m, "test")[0].shape == (4, 3, 8, 8)


def test_manifest_json_round_trip(tmp_path):
    _write_folder(tmp_path / "ds", 2, 2)
    m = ingest_dataset(tmp_path / "ds", resolution=8, manifest_path=tmp_path / "m.json")
    assert DatasetManifest.load(tmp_path / "m.json") == m


def test_workspace_missing_entries(tmp_path):
    ws = Workspace(tmp_path)
    with pytest.raises(ConfigurationError):
        ws.dataset("nope")
    with pytest.raises(ConfigurationError):
        ws.model("nope")


def test_run_dirs_never_collide(tmp_path):
    dirs = {create_run_dir(tmp_path, "train", "abc") for _ in range(5)}
    assert len(dirs) == 5


def test_metrics_append_only(tmp_path):
    w = MetricsWriter(tmp_path / "m.csv")
    w.append({"step": 0, "loss": 1.5})
    MetricsWriter(tmp_path / "m.csv").append({"step": 1, "loss": 1.0})
    rows = read_metrics(tmp_path / "m.csv")
    assert [r["step"] for r in rows] == ["0", "1"]
