"""Small classifier zoo with named feature taps.

Three desk-scale architectures stand in for the usual surrogate/victim split:
``vgg`` (the surrogate, taps ``maxpool3`` and ``conv4_1``), ``resnet`` and
``densenet`` (black-box victims).  Every model takes raw 0-255 pixels and
normalizes internally with the statistics stored in its checkpoint.
"""

from dataclasses import dataclass
import hashlib
import logging
import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigurationError, InvalidInputError, TrainingError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "facl-classifier"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class FeatureTap:
    model_id: str
    layer_name: str
    feature_dim: int


class Classifier(nn.Module):
    """Base: subclasses fill ``self.stages`` (an ordered dict of named blocks)
    and ``self.head``."""

    arch = None

    def __init__(self, num_classes, resolution, mean, std):
        super().__init__()
        self.num_classes = num_classes
        self.resolution = resolution
        self.register_buffer("mean", torch.as_tensor(mean, dtype=torch.float32).view(1, -1, 1, 1))
        self.register_buffer("std", torch.as_tensor(std, dtype=torch.float32).view(1, -1, 1, 1))

    def normalize(self, x):
        return (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)

    def _run(self, x, stop_at=None):
        h = self.normalize(x)
        for name, block in self.stages.items():
            h = block(h)
            if name == stop_at:
                return h
        if stop_at is not None:
            raise ConfigurationError(f"{self.arch} has no tap named {stop_at!r}; taps: {list(self.stages)}")
        return self.head(h)

    def forward(self, x):
        return self._run(x)

    def features(self, x, layer_name):
        return self._run(x, stop_at=layer_name)

    @property
    def tap_names(self):
        return list(self.stages)


def _conv_bn(cin, cout):
    return [nn.Conv2d(cin, cout, 3, padding=1, bias=False), nn.BatchNorm2d(cout), nn.ReLU(True)]


class SmallVGG(Classifier):
    arch = "vgg"

    def __init__(self, num_classes=10, resolution=32, mean=(127.5,) * 3, std=(64.0,) * 3, width=32):
        super().__init__(num_classes, resolution, mean, std)
        w = width
        self.stages = nn.ModuleDict({
            "maxpool1": nn.Sequential(*_conv_bn(3, w), *_conv_bn(w, w), nn.MaxPool2d(2)),
            "maxpool2": nn.Sequential(*_conv_bn(w, 2 * w), *_conv_bn(2 * w, 2 * w), nn.MaxPool2d(2)),
            "maxpool3": nn.Sequential(*_conv_bn(2 * w, 4 * w), *_conv_bn(4 * w, 4 * w), nn.MaxPool2d(2)),
            "conv4_1": nn.Sequential(*_conv_bn(4 * w, 8 * w)),
            "maxpool4": nn.Sequential(*_conv_bn(8 * w, 8 * w), nn.MaxPool2d(2)),
        })
        self.head = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(8 * w, num_classes))


class BasicBlock(nn.Module):
    def __init__(self, cin, cout, stride):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.shortcut = nn.Identity()
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(nn.Conv2d(cin, cout, 1, stride, bias=False), nn.BatchNorm2d(cout))

    def forward(self, x):
        h = F.relu(self.bn1(self.conv1(x)))
        return F.relu(self.bn2(self.conv2(h)) + self.shortcut(x))


class SmallResNet(Classifier):
    arch = "resnet"

    def __init__(self, num_classes=10, resolution=32, mean=(127.5,) * 3, std=(64.0,) * 3, width=32):
        super().__init__(num_classes, resolution, mean, std)
        w = width
        self.stages = nn.ModuleDict({
            "stem": nn.Sequential(*_conv_bn(3, w)),
            "layer1": nn.Sequential(BasicBlock(w, w, 1), BasicBlock(w, w, 1)),
            "layer2": nn.Sequential(BasicBlock(w, 2 * w, 2), BasicBlock(2 * w, 2 * w, 1)),
            "layer3": nn.Sequential(BasicBlock(2 * w, 4 * w, 2), BasicBlock(4 * w, 4 * w, 1)),
        })
        self.head = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(4 * w, num_classes))


class DenseLayer(nn.Module):
    def __init__(self, cin, growth):
        super().__init__()
        self.body = nn.Sequential(nn.BatchNorm2d(cin), nn.ReLU(True), nn.Conv2d(cin, growth, 3, padding=1, bias=False))

    def forward(self, x):
        return torch.cat([x, self.body(x)], 1)


def _dense_block(cin, growth, n_layers):
    layers = [DenseLayer(cin + i * growth, growth) for i in range(n_layers)]
    return nn.Sequential(*layers), cin + n_layers * growth


def _transition(cin, cout):
    return nn.Sequential(nn.BatchNorm2d(cin), nn.ReLU(True), nn.Conv2d(cin, cout, 1, bias=False), nn.AvgPool2d(2))


class SmallDenseNet(Classifier):
    arch = "densenet"

    def __init__(self, num_classes=10, resolution=32, mean=(127.5,) * 3, std=(64.0,) * 3, growth=16, n_layers=4):
        super().__init__(num_classes, resolution, mean, std)
        c = 2 * growth
        stem = nn.Conv2d(3, c, 3, padding=1, bias=False)
        b1, c = _dense_block(c, growth, n_layers)
        t1 = _transition(c, c // 2)
        c //= 2
        b2, c = _dense_block(c, growth, n_layers)
        t2 = _transition(c, c // 2)
        c //= 2
        b3, c = _dense_block(c, growth, n_layers)
        self.stages = nn.ModuleDict({
            "stem": stem,
            "dense1": nn.Sequential(b1, t1),
            "dense2": nn.Sequential(b2, t2),
            "dense3": nn.Sequential(b3, nn.BatchNorm2d(c), nn.ReLU(True)),
        })
        self.head = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(c, num_classes))


ARCHITECTURES = {cls.arch: cls for cls in (SmallVGG, SmallResNet, SmallDenseNet)}


def build_model(arch, num_classes=10, resolution=32, mean=(127.5,) * 3, std=(64.0,) * 3, **kwargs):
    if arch not in ARCHITECTURES:
        raise ConfigurationError(f"unknown architecture {arch!r}; known: {sorted(ARCHITECTURES)}")
    model = ARCHITECTURES[arch](num_classes=num_classes, resolution=resolution, mean=mean, std=std, **kwargs)
    model.model_kwargs = dict(kwargs)
    return model


def tap_dimensions(model):
    """Flattened feature size of every named tap, measured with a probe input."""
    model_was_training = model.training
    model.eval()
    probe = torch.full((1, 3, model.resolution, model.resolution), 127.0)
    dims = {}
    with torch.no_grad():
        h = model.normalize(probe)
        for name, block in model.stages.items():
            h = block(h)
            dims[name] = int(h[0].numel())
    model.train(model_was_training)
    return dims


def freeze(model):
    """Put a model in eval mode and stop gradients to its parameters."""
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def extract_features(model, tap, images):
    """Flattened per-sample features at ``tap`` (a FeatureTap or layer name).

    Gradients flow to ``images``; the model is expected to be frozen.
    """
    layer = tap.layer_name if isinstance(tap, FeatureTap) else tap
    if layer not in model.stages:
        raise ConfigurationError(f"{model.arch} has no tap named {layer!r}; taps: {model.tap_names}")
    return model.features(images, layer).flatten(1)


def classify(model, images):
    """Predicted labels and logits.  Ties resolve to the lowest class index."""
    if images.ndim == 3:
        images = images.unsqueeze(0)
    if images.ndim != 4:
        raise InvalidInputError(f"expected (N, C, H, W) images, got {tuple(images.shape)}")
    logits = model(images)
    # torch.argmax returns the first maximal index
    return torch.argmax(logits, dim=1), logits


def parameter_checksum(model):
    h = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class SurrogateTrainConfig:
    epochs: int = 4
    batch_size: int = 64
    learning_rate: float = 2e-3
    weight_decay: float = 5e-4
    seed: int = 0
    augment: bool = True
    flip: bool = False


@torch.no_grad()
def accuracy(model, images, labels, batch_size=256):
    """Top-1 accuracy in percent over uint8 or float raw-pixel images."""
    model.eval()
    correct = 0
    for i in range(0, len(images), batch_size):
        x = torch.as_tensor(images[i:i + batch_size]).float()
        pred, _ = classify(model, x)
        correct += int((pred == torch.as_tensor(labels[i:i + batch_size])).sum())
    return 100.0 * correct / max(len(images), 1)


def _augment(x, rng, flip):
    # optional horizontal flip and +/-2 pixel translation
    if flip:
        mask = torch.from_numpy(rng.random(len(x)) < 0.5)
        x = torch.where(mask[:, None, None, None], x.flip(-1), x)
    dx, dy = rng.integers(-2, 3, size=2)
    padded = F.pad(x, (2, 2, 2, 2), mode="replicate")
    h, w = x.shape[-2:]
    return padded[..., 2 + dy:2 + dy + h, 2 + dx:2 + dx + w]


def train_classifier(arch, train_images, train_labels, test_images, test_labels, num_classes,
                     config=SurrogateTrainConfig(), **model_kwargs):
    """Train a zoo model from scratch on uint8 ``(N, 3, H, W)`` arrays.

    Returns ``(model, test_accuracy)`` with the model frozen.
    """
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    train_images = np.asarray(train_images)
    mean = train_images.mean(axis=(0, 2, 3))
    std = train_images.std(axis=(0, 2, 3)) + 1e-3
    model = build_model(arch, num_classes, train_images.shape[-1], mean, std, **model_kwargs)
    steps_per_epoch = math.ceil(len(train_images) / config.batch_size)
    opt = torch.optim.AdamW(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
    sched = torch.optim.lr_scheduler.OneCycleLR(
        opt, max_lr=config.learning_rate, total_steps=max(1, config.epochs * steps_per_epoch))
    labels_t = torch.as_tensor(np.asarray(train_labels), dtype=torch.long)
    for epoch in range(config.epochs):
        model.train()
        order = rng.permutation(len(train_images))
        running = 0.0
        for step in range(steps_per_epoch):
            idx = order[step * config.batch_size:(step + 1) * config.batch_size]
            x = torch.from_numpy(train_images[idx]).float()
            if config.augment:
                x = _augment(x, rng, config.flip)
            loss = F.cross_entropy(model(x), labels_t[idx])
            if not torch.isfinite(loss):
                raise TrainingError(f"{arch} diverged at epoch {epoch} step {step}",
                                    {"epoch": epoch, "step": step, "loss": float(loss)})
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
            running += loss.item()
        logger.info("%s epoch %d loss %.4f", arch, epoch, running / steps_per_epoch)
    freeze(model)
    acc = accuracy(model, test_images, test_labels)
    return model, acc


def save_classifier(path, model, model_id, dataset_id, test_accuracy, extra=None):
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_id": model_id,
        "arch": model.arch,
        "num_classes": model.num_classes,
        "resolution": model.resolution,
        "mean": model.mean.flatten().tolist(),
        "std": model.std.flatten().tolist(),
        "dataset": dataset_id,
        "test_accuracy": test_accuracy,
        "model_kwargs": getattr(model, "model_kwargs", {}),
        "taps": tap_dimensions(model),
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, path)
    return payload


def load_classifier(path, map_location="cpu"):
    """Load a frozen classifier; returns ``(model, payload)``."""
    payload = torch.load(path, map_location=map_location, weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"{path} is not a classifier checkpoint")
    model = build_model(payload["arch"], payload["num_classes"], payload["resolution"],
                        payload["mean"], payload["std"], **payload.get("model_kwargs", {}))
    model.load_state_dict(payload["state_dict"])
    return freeze(model), payload
