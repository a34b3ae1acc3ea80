"""Run directories: atomic creation, append-only metrics, JSON records."""

import csv
from datetime import datetime, timezone
import json
import os
from pathlib import Path


def utc_timestamp():
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")


def create_run_dir(out_dir, kind, config_hash):
    """Create a fresh ``<kind>-<hash>-<timestamp>`` directory under ``out_dir``.

    Never reuses an existing directory; a same-hash rerun gets a new one.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = f"{kind}-{config_hash}-{utc_timestamp()}"
    for attempt in range(1000):
        path = out_dir / (base if attempt == 0 else f"{base}-{attempt}")
        try:
            path.mkdir()
            return path
        except FileExistsError:
            continue
    raise RuntimeError(f"could not create a unique run directory under {out_dir}")


class MetricsWriter:
    """Append-only CSV; the header is taken from the first row written."""

    def __init__(self, path):
        self.path = Path(path)
        self._fields = None
        if self.path.exists() and self.path.stat().st_size:
            with open(self.path, newline="") as fh:
                self._fields = next(csv.reader(fh))

    def append(self, row):
        new = self._fields is None
        if new:
            self._fields = list(row)
        with open(self.path, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self._fields, extrasaction="ignore")
            if new:
                writer.writeheader()
            writer.writerow(row)


def read_metrics(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=1, sort_keys=True, default=str))
    os.replace(tmp, path)


def append_jsonl(path, obj):
    with open(path, "a") as fh:
        fh.write(json.dumps(obj, sort_keys=True, default=str) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
