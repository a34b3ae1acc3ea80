"""Perturbation generator network and the l-infinity projector."""

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn

from .errors import ConfigurationError, InvalidInputError

CHECKPOINT_FORMAT = "facl-generator"
CHECKPOINT_VERSION = 1
PIXEL_MAX = 255.0


@dataclass(frozen=True)
class GeneratorConfig:
    input_channels: int = 3
    base_width: int = 64
    num_residual_blocks: int = 6
    input_resolution: int = 32

    def __post_init__(self):
        if self.input_resolution % 4:
            raise ConfigurationError("input_resolution must be divisible by 4 (two stride-2 stages)")
        if min(self.input_channels, self.base_width) < 1 or self.num_residual_blocks < 0:
            raise ConfigurationError(f"invalid generator config {self}")


@dataclass(frozen=True)
class PerturbationBudget:
    epsilon: float = 10.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")


class ResidualBlock(nn.Module):
    def __init__(self, width):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(width, width, 3, bias=False),
            nn.BatchNorm2d(width),
            nn.ReLU(True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(width, width, 3, bias=False),
            nn.BatchNorm2d(width),
        )

    def forward(self, x):
        return x + self.block(x)


class Generator(nn.Module):
    """ResNet-style image-to-image generator.

    Two stride-2 down-sampling stages, a stack of residual blocks at quarter
    resolution, two transposed-convolution up-sampling stages.  Inputs and
    outputs are on the 0-255 pixel scale; the output passes through a scaled
    tanh so it stays inside (0, 255).
    """

    def __init__(self, config=GeneratorConfig()):
        super().__init__()
        self.config = config
        c, w = config.input_channels, config.base_width
        self.downsample = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(c, w, 7, bias=False),
            nn.BatchNorm2d(w),
            nn.ReLU(True),
            nn.Conv2d(w, 2 * w, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(2 * w),
            nn.ReLU(True),
            nn.Conv2d(2 * w, 4 * w, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(4 * w),
            nn.ReLU(True),
        )
        self.residual = nn.Sequential(*[ResidualBlock(4 * w) for _ in range(config.num_residual_blocks)])
        self.upsample = nn.Sequential(
            nn.ConvTranspose2d(4 * w, 2 * w, 3, stride=2, padding=1, output_padding=1, bias=False),
            nn.BatchNorm2d(2 * w),
            nn.ReLU(True),
            nn.ConvTranspose2d(2 * w, w, 3, stride=2, padding=1, output_padding=1, bias=False),
            nn.BatchNorm2d(w),
            nn.ReLU(True),
            nn.ReflectionPad2d(3),
            nn.Conv2d(w, c, 7),
        )

    def _check(self, x):
        cfg = self.config
        expected = (cfg.input_channels, cfg.input_resolution, cfg.input_resolution)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise InvalidInputError(f"generator expects (N, {expected[0]}, {expected[1]}, {expected[2]}), got {tuple(x.shape)}")

    def downsample_features(self, x):
        """Output of the down-sampling stage for a raw-pixel batch."""
        self._check(x)
        return self.downsample(x / PIXEL_MAX)

    def forward(self, x):
        self._check(x)
        h = self.upsample(self.residual(self.downsample(x / PIXEL_MAX)))
        return PIXEL_MAX * (torch.tanh(h) + 1) / 2


def generate(generator, image):
    """Unbounded adversarial image ``G(x)``."""
    return generator(image)


def project(unbounded, reference, budget):
    """Bound ``unbounded`` to the l-infinity ball around ``reference``.

    The result is ``clamp(reference + clamp(unbounded - reference, -eps, eps),
    0, 255)`` whenever the reference lies in the valid pixel range.  For
    out-of-range references (unclamped augmented images) the budget takes
    priority over the pixel range.  ``|out - reference| <= eps`` holds exactly
    in the tensor's own floating-point arithmetic.  Gradients pass through
    unclamped elements unchanged.
    """
    if unbounded.shape != reference.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(unbounded.shape)} vs {tuple(reference.shape)}")
    eps = budget.epsilon if isinstance(budget, PerturbationBudget) else float(budget)
    ref = reference.detach()
    out = torch.clamp(unbounded, 0.0, PIXEL_MAX)
    out = torch.minimum(torch.maximum(out, ref - eps), ref + eps)
    # ref +/- eps can round one ulp past the ball; step those entries back toward ref
    for _ in range(8):
        delta = out.detach() - ref
        over = delta.abs() > eps
        if not over.any():
            break
        out = torch.where(over, torch.nextafter(out.detach(), ref), out)
    return out


def save_generator(path, generator, train_config_hash=None, extra=None):
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(generator.config),
        "state_dict": generator.state_dict(),
        "train_config_hash": train_config_hash,
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_generator(path, map_location="cpu"):
    """Load a generator checkpoint; returns ``(generator, payload)`` in eval mode."""
    payload = torch.load(path, map_location=map_location, weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"{path} is not a generator checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported generator checkpoint version {payload.get('version')}")
    generator = Generator(GeneratorConfig(**payload["config"]))
    generator.load_state_dict(payload["state_dict"])
    generator.eval()
    return generator, payload
