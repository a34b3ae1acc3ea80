import json
import shutil
import subprocess
import sys

import pytest
import yaml

from facl.cli import main
from facl.data import Workspace


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    raw = root / "raw"
    assert main(["synth", "--kind", "shapes", "--dest", str(raw), "--train-per-class", "6",
                 "--test-per-class", "3"]) == 0
    common = ["--data-root", str(root / "data")]
    assert main(["ingest", "--root", str(raw), "--id", "toy", *common]) == 0
    assert main(["train-surrogate", "--dataset", "toy", "--arch", "vgg", "--model-id", "vgg_toy",
                 "--epochs", "1", "--width", "4", *common]) == 0
    return root


def _train_yaml(path, **extra):
    cfg = {"dataset": "toy", "surrogate": "vgg_toy", "max_steps": 2, "batch_size": 8,
           "generator_base_width": 4, "generator_residual_blocks": 1, **extra}
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_ingest_wrote_manifest(workspace):
    m = Workspace(workspace / "data").dataset("toy")
    assert m.num_classes == 10 and len(m.splits["train"]) == 60 and len(m.splits["test"]) == 30


def test_train_eval_report(workspace, tmp_path, capsys):
    common = ["--data-root", str(workspace / "data"), "--out-dir", str(tmp_path)]
    assert main(["train", "--config", str(_train_yaml(tmp_path / "c.yaml")), "--variant", "full", *common]) == 0
    run_dir = tmp_path / capsys.readouterr().out.strip().splitlines()[-1].split("/")[-1]
    assert {"config.yaml", "metrics.csv", "generator.pt", "record.json"} <= {p.name for p in run_dir.iterdir()}
    assert yaml.safe_load((run_dir / "config.yaml").read_text())["max_steps"] == 2

    assert main(["eval", "--generator", str(run_dir / "generator.pt"), "--victim", "vgg_toy", *common]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    eval_dir = tmp_path / out[-1].split("/")[-1]
    rec = json.loads((eval_dir / "record.json").read_text())
    assert rec["num_samples"] == 30 and rec["epsilon"] == 10 and rec["psnr"] >= 28.13
    assert main(["report", "--run", str(eval_dir)]) == 0
    assert (eval_dir / "summary.csv").exists() and (eval_dir / "accuracy_bars.png").exists()


def test_ablate_records_every_variant(workspace, tmp_path, capsys):
    cfg = {"train": yaml.safe_load(_train_yaml(tmp_path / "t.yaml", max_steps=1).read_text()),
           "victims": ["vgg_toy"], "seeds": [0], "eval_limit": 8}
    (tmp_path / "a.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["ablate", "--config", str(tmp_path / "a.yaml"), "--data-root", str(workspace / "data"),
                 "--out-dir", str(tmp_path)]) == 0
    run_dir = tmp_path / capsys.readouterr().out.strip().splitlines()[-1].split("/")[-1]
    records = [json.loads(l) for l in (run_dir / "records.jsonl").read_text().splitlines()]
    assert len(records) == 8 and len({r["variant"] for r in records}) == 8
    assert all((run_dir / f"{r['variant']}-seed0" / "config.yaml").exists() for r in records)


def test_spectra_dump(workspace, tmp_path, capsys):
    assert main(["spectra", "--dataset", "toy", "--data-root", str(workspace / "data"),
                 "--out-dir", str(tmp_path)]) == 0
    run_dir = tmp_path / capsys.readouterr().out.strip().splitlines()[-1].split("/")[-1]
    names = {p.name for p in run_dir.iterdir()}
    assert {"mask_band_pass.png", "mask_band_reject.png", "mid_band.png", "fadr.png"} <= names


def test_errors_exit_nonzero(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("rho: 1.5\n")
    assert main(["train", "--config", str(bad), "--data-root", str(workspace / "data")]) == 2
    assert "rho" in capsys.readouterr().err
    assert main(["eval", "--generator", str(tmp_path / "missing.pt"), "--victim", "vgg_toy",
                 "--data-root", str(workspace / "data")]) == 2


def test_console_script_installed():
    exe = shutil.which("facl")
    cmd = [exe] if exe else [sys.executable, "-m", "facl.cli"]
    out = subprocess.run([*cmd, "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for sub in ("ingest", "train", "eval", "ablate", "report", "spectra"):
        assert sub in out.stdout
