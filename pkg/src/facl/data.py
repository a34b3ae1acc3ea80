"""Image-folder ingestion, dataset manifests and the on-disk workspace.

A workspace is a directory (``$FACL_DATA_ROOT`` by default) holding::

    datasets/<id>/manifest.json     one per ingested dataset
    datasets/<id>/quarantine.json   files that failed to decode
    models/<model_id>.pt            classifier checkpoints
    models/registry.json            arch, taps, resolution, stats per model
"""

from dataclasses import asdict, dataclass, field
import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigurationError, InvalidInputError

logger = logging.getLogger(__name__)

DATA_ROOT_ENV = "FACL_DATA_ROOT"
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}
SPLITS = ("train", "test")


@dataclass
class DatasetManifest:
    id: str
    root: str
    layout: str
    classes: list
    resolution: int
    splits: dict
    mean: list
    std: list
    checksum: str
    quarantined: list = field(default_factory=list)

    @property
    def num_classes(self):
        return len(self.classes)

    def __len__(self):
        return sum(len(v) for v in self.splits.values())

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def save(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


def decode_image(path, resolution):
    """Decode any Pillow-readable image to a uint8 ``(3, R, R)`` array."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if im.size != (resolution, resolution):
            im = im.resize((resolution, resolution), Image.BILINEAR)
        return np.asarray(im, dtype=np.uint8).transpose(2, 0, 1).copy()


def _class_dirs(root):
    return sorted(p for p in Path(root).iterdir() if p.is_dir() and not p.name.startswith("."))


def _image_files(directory):
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _stable_fraction(name):
    return int(hashlib.sha256(name.encode()).hexdigest()[:8], 16) / 0xFFFFFFFF


def ingest_dataset(root, dataset_id=None, layout="auto", resolution=32, test_fraction=0.2,
                   manifest_path=None):
    """Scan an image-folder tree and build its manifest.

    ``layout="split"`` expects ``root/train/<class>/`` and ``root/test/<class>/``;
    ``layout="flat"`` expects ``root/<class>/`` and assigns each file to the test
    split by a stable hash of its relative path.  Undecodable files are
    quarantined and left out.  Raises on an empty class directory.
    """
    root = Path(root).resolve()
    if not root.is_dir():
        raise ConfigurationError(f"dataset root {root} does not exist")
    if layout == "auto":
        layout = "split" if all((root / s).is_dir() for s in SPLITS) else "flat"
    if layout == "split":
        class_sets = {s: [d.name for d in _class_dirs(root / s)] for s in SPLITS}
        classes = sorted(set().union(*class_sets.values()))
        sources = {s: [(root / s / c, c) for c in class_sets[s]] for s in SPLITS}
    elif layout == "flat":
        classes = [d.name for d in _class_dirs(root)]
        sources = {"all": [(root / c, c) for c in classes]}
    else:
        raise ConfigurationError(f"unknown layout {layout!r}")
    if not classes:
        raise InvalidInputError(f"{root} contains no class directories")
    label_of = {c: i for i, c in enumerate(classes)}

    splits = {s: [] for s in SPLITS}
    quarantined = []
    digest = hashlib.sha256()
    pixel_sum = np.zeros(3)
    pixel_sq = np.zeros(3)
    n_train_pixels = 0
    for split, dirs in sources.items():
        for directory, cls in dirs:
            files = _image_files(directory)
            if not files:
                raise InvalidInputError(f"class directory {cls!r} ({directory}) contains no images")
            for path in files:
                rel = str(path.relative_to(root))
                try:
                    arr = decode_image(path, resolution)
                except (UnidentifiedImageError, OSError, ValueError) as exc:
                    quarantined.append({"path": rel, "error": str(exc)})
                    continue
                target = split if split != "all" else ("test" if _stable_fraction(rel) < test_fraction else "train")
                splits[target].append([rel, label_of[cls]])
                digest.update(rel.encode())
                digest.update(str(label_of[cls]).encode())
                digest.update(path.read_bytes())
                if target == "train":
                    a = arr.reshape(3, -1).astype(np.float64)
                    pixel_sum += a.sum(1)
                    pixel_sq += (a ** 2).sum(1)
                    n_train_pixels += a.shape[1]
    if quarantined:
        logger.warning("quarantined %d unreadable images under %s", len(quarantined), root)
    n = max(n_train_pixels, 1)
    mean = pixel_sum / n
    std = np.sqrt(np.maximum(pixel_sq / n - mean ** 2, 0)) + 1e-3
    manifest = DatasetManifest(
        id=dataset_id or root.name, root=str(root), layout=layout, classes=classes,
        resolution=resolution, splits=splits, mean=mean.tolist(), std=std.tolist(),
        checksum=digest.hexdigest(), quarantined=quarantined,
    )
    validate_manifest(manifest)
    if manifest_path is not None:
        manifest.save(manifest_path)
    return manifest


def validate_manifest(manifest):
    seen = {}
    for split, items in manifest.splits.items():
        for rel, _ in items:
            if rel in seen:
                raise InvalidInputError(f"{rel} appears in both {seen[rel]} and {split} splits")
            seen[rel] = split


_ARRAY_CACHE = {}


def load_split(manifest, split):
    """Decode one split into ``(uint8 images (N, 3, R, R), int64 labels)``.

    Decoded arrays are cached per (checksum, split) for the life of the process.
    """
    if split not in manifest.splits:
        raise ConfigurationError(f"dataset {manifest.id} has no split {split!r}")
    key = (manifest.checksum, split, manifest.resolution)
    if key not in _ARRAY_CACHE:
        items = manifest.splits[split]
        r = manifest.resolution
        images = np.empty((len(items), 3, r, r), dtype=np.uint8)
        for i, (rel, _) in enumerate(items):
            images[i] = decode_image(Path(manifest.root) / rel, r)
        labels = np.array([lab for _, lab in items], dtype=np.int64)
        _ARRAY_CACHE[key] = (images, labels)
    return _ARRAY_CACHE[key]


class Workspace:
    """Datasets and model checkpoints under one root directory."""

    def __init__(self, root=None):
        self.root = Path(root or os.environ.get(DATA_ROOT_ENV, "facl_data")).resolve()

    @property
    def datasets_dir(self):
        return self.root / "datasets"

    @property
    def models_dir(self):
        return self.root / "models"

    def manifest_path(self, dataset_id):
        return self.datasets_dir / dataset_id / "manifest.json"

    def ingest(self, image_root, dataset_id, **kwargs):
        manifest = ingest_dataset(image_root, dataset_id, manifest_path=self.manifest_path(dataset_id), **kwargs)
        qpath = self.datasets_dir / dataset_id / "quarantine.json"
        qpath.write_text(json.dumps(manifest.quarantined, indent=1))
        return manifest

    def dataset(self, dataset_id):
        path = self.manifest_path(dataset_id)
        if not path.exists():
            raise ConfigurationError(f"dataset {dataset_id!r} not found in {self.datasets_dir}; run `facl ingest` first")
        return DatasetManifest.load(path)

    def registry(self):
        path = self.models_dir / "registry.json"
        return json.loads(path.read_text()) if path.exists() else {}

    def model_path(self, model_id):
        return self.models_dir / f"{model_id}.pt"

    def register_model(self, model_id, payload):
        self.models_dir.mkdir(parents=True, exist_ok=True)
        registry = self.registry()
        registry[model_id] = {
            "arch": payload["arch"],
            "dataset": payload["dataset"],
            "num_classes": payload["num_classes"],
            "resolution": payload["resolution"],
            "mean": payload["mean"],
            "std": payload["std"],
            "taps": payload["taps"],
            "test_accuracy": payload["test_accuracy"],
            "checkpoint": str(self.model_path(model_id)),
        }
        tmp = self.models_dir / "registry.json.tmp"
        tmp.write_text(json.dumps(registry, indent=1, sort_keys=True))
        os.replace(tmp, self.models_dir / "registry.json")

    def model(self, model_id):
        from .models import load_classifier

        path = self.model_path(model_id)
        if not path.exists():
            raise ConfigurationError(f"model {model_id!r} not found in {self.models_dir}; run `facl train-surrogate` first")
        return load_classifier(path)
