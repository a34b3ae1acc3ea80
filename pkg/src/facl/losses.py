"""Feature-contrast objectives for generator training."""

from dataclasses import dataclass
import math
import warnings

import torch

from .errors import ConfigurationError, InvalidInputError, TrainingError

NORM_EPS = 1e-8


class DegenerateFeatureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LossWeights:
    lambda_orig: float = 1.0
    lambda_facl: float = 1.0

    def __post_init__(self):
        if self.lambda_orig < 0 or self.lambda_facl < 0:
            raise ConfigurationError(f"loss weights must be non-negative, got {self}")
        if self.lambda_orig == 0 and self.lambda_facl == 0:
            raise ConfigurationError("lambda_orig and lambda_facl cannot both be zero")


@dataclass
class FeaturePairSet:
    """Band-specific clean/adversarial features, each shaped ``(N, D)``."""

    z_mid_clean: torch.Tensor
    z_mid_adv: torch.Tensor
    z_lh_clean: torch.Tensor
    z_lh_adv: torch.Tensor

    def __post_init__(self):
        shapes = {tuple(z.shape) for z in (self.z_mid_clean, self.z_mid_adv, self.z_lh_clean, self.z_lh_adv)}
        if len(shapes) != 1:
            raise InvalidInputError(f"feature pairs must share one shape, got {sorted(shapes)}")


def cosine_similarity(a, b, eps=NORM_EPS):
    """Cosine similarity ``a.b / (max(|a|, eps) max(|b|, eps))``.

    1-D inputs give a scalar; ``(N, D)`` inputs give the mean over rows.
    """
    a = torch.as_tensor(a)
    b = torch.as_tensor(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.ndim == 1:
        a, b = a[None], b[None]
    a, b = a.flatten(1), b.flatten(1)
    na = a.norm(dim=1)
    nb = b.norm(dim=1)
    if bool(((na < eps) & (nb < eps)).any()):
        warnings.warn("cosine similarity of two (near) zero vectors; contributes 0", DegenerateFeatureWarning)
    sim = (a * b).sum(1) / (na.clamp_min(eps) * nb.clamp_min(eps))
    return sim.mean()


def loss_orig(clean_features, adv_features):
    """Mean clean/adversarial feature similarity; lower means further apart."""
    return cosine_similarity(clean_features, adv_features)


def loss_facl(pairs):
    """Repel mid-band pairs and attract low/high-band pairs."""
    return (cosine_similarity(pairs.z_mid_clean, pairs.z_mid_adv)
            - cosine_similarity(pairs.z_lh_clean, pairs.z_lh_adv))


def total_loss(l_orig, l_facl, weights=LossWeights()):
    for name, value in (("loss_orig", l_orig), ("loss_facl", l_facl)):
        v = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
        if not math.isfinite(v):
            raise TrainingError(f"{name} is not finite ({v})", {name: v})
    return weights.lambda_orig * l_orig + weights.lambda_facl * l_facl
