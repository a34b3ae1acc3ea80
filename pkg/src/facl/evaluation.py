"""Transferability evaluation, image-quality metrics and generator difference maps."""

from dataclasses import asdict, dataclass, field
import logging
import math

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ConfigurationError, InvalidInputError
from .generator import PIXEL_MAX, PerturbationBudget, project
from .models import classify

logger = logging.getLogger(__name__)

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
# PSNR of identical images is infinite; records store this cap instead
PSNR_SENTINEL = 100.0


@dataclass
class AttackRunRecord:
    generator_id: str
    victim_id: str
    dataset_id: str
    clean_top1: float
    adv_top1: float
    ssim: float
    psnr: float
    config_hash: str
    timestamp: str
    num_samples: int = 0
    epsilon: float = 10.0
    lpips: float | None = None
    setting: str = ""
    variant: str = ""
    seed: int | None = None
    status: str = "ok"
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.status == "ok":
            for name in ("clean_top1", "adv_top1"):
                v = getattr(self, name)
                if not 0 <= v <= 100:
                    raise InvalidInputError(f"{name}={v} outside [0, 100]")

    def to_dict(self):
        return asdict(self)


# ---- image quality -------------------------------------------------------

def _as_float64(x):
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().double()
    return torch.from_numpy(np.asarray(x, dtype=np.float64))


def psnr(clean, adv, peak=PIXEL_MAX):
    """Per-image PSNR in dB for ``(N, C, H, W)`` batches on the 0-255 scale.

    Identical images get :data:`PSNR_SENTINEL`.
    """
    a, b = _as_float64(clean), _as_float64(adv)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.ndim == 3:
        a, b = a[None], b[None]
    mse = ((a - b) ** 2).flatten(1).mean(1)
    out = torch.full_like(mse, PSNR_SENTINEL)
    nz = mse > 0
    out[nz] = torch.clamp(10 * torch.log10(peak ** 2 / mse[nz]), max=PSNR_SENTINEL)
    return out


def ssim(clean, adv, window=SSIM_WINDOW, peak=PIXEL_MAX):
    """Per-image SSIM with a uniform ``window x window`` sliding window.

    Stabilisers are ``(0.01 * 255)^2`` and ``(0.03 * 255)^2``; only windows
    fully inside the image count, and channels are averaged.
    """
    a, b = _as_float64(clean), _as_float64(adv)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.ndim == 3:
        a, b = a[None], b[None]
    if min(a.shape[-2:]) < window:
        raise InvalidInputError(f"images smaller than the {window}x{window} SSIM window")
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    pool = lambda t: F.avg_pool2d(t, window, stride=1)
    mu_a, mu_b = pool(a), pool(b)
    var_a = pool(a * a) - mu_a ** 2
    var_b = pool(b * b) - mu_b ** 2
    cov = pool(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return (num / den).flatten(1).mean(1)


_PERCEPTUAL_METRICS = {}


def register_perceptual_metric(name, fn):
    """Plug in a perceptual distance ``fn(clean, adv) -> per-image tensor``."""
    _PERCEPTUAL_METRICS[name] = fn


def perceptual_distance(clean, adv, name="lpips"):
    """Mean perceptual distance, or None when no plugin is registered."""
    fn = _PERCEPTUAL_METRICS.get(name)
    if fn is None:
        return None
    return float(torch.as_tensor(fn(clean, adv)).double().mean())


def image_quality(clean, adv):
    """``(mean SSIM, mean PSNR)`` of paired 0-255 batches."""
    return float(ssim(clean, adv).mean()), float(psnr(clean, adv).mean())


# ---- attacks -----------------------------------------------------------------

@torch.no_grad()
def craft_adversarial(generator, images, budget=PerturbationBudget()):
    """Bounded adversarial versions of a uint8/float raw-pixel batch.

    Inputs at a resolution other than the generator's are resized to it, the
    perturbation is resized back and re-projected around the original image.
    """
    generator.eval()
    x = torch.as_tensor(images).float()
    res = generator.config.input_resolution
    if x.shape[-1] == res and x.shape[-2] == res:
        return project(generator(x), x, budget)
    small = F.interpolate(x, size=(res, res), mode="bilinear", align_corners=False)
    delta = project(generator(small), small, budget) - small
    delta = F.interpolate(delta, size=x.shape[-2:], mode="bilinear", align_corners=False)
    return project(x + delta, x, budget)


@torch.no_grad()
def evaluate_attack(generator, victim, images, labels, budget=PerturbationBudget(), batch_size=128,
                    limit=None, generator_id="", victim_id="", dataset_id="", config_hash="",
                    timestamp="", return_details=False):
    """Clean and post-attack top-1 accuracy of ``victim`` plus image quality.

    The inference path is clean image -> generator -> projection -> victim.
    """
    from .runs import utc_timestamp

    images = np.asarray(images)
    labels = np.asarray(labels)
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    if len(images) == 0:
        raise InvalidInputError("no images to evaluate")
    notes = []
    if images.shape[-1] != generator.config.input_resolution:
        notes.append(f"resized {images.shape[-1]}px inputs to generator resolution "
                     f"{generator.config.input_resolution}px and back")
        logger.info(notes[-1])
    victim.eval()
    clean_correct, adv_correct = [], []
    ssims, psnrs, lp = [], [], []
    max_pert = 0.0
    for i in range(0, len(images), batch_size):
        x = torch.as_tensor(images[i:i + batch_size]).float()
        y = torch.as_tensor(labels[i:i + batch_size])
        adv = craft_adversarial(generator, x, budget)
        max_pert = max(max_pert, float((adv - x).abs().max()))
        clean_correct.append(classify(victim, x)[0] == y)
        adv_correct.append(classify(victim, adv)[0] == y)
        ssims.append(ssim(x, adv))
        psnrs.append(psnr(x, adv))
        d = perceptual_distance(x, adv)
        if d is not None:
            lp.append(d * len(x))
    clean_correct = torch.cat(clean_correct)
    adv_correct = torch.cat(adv_correct)
    record = AttackRunRecord(
        generator_id=generator_id, victim_id=victim_id, dataset_id=dataset_id,
        clean_top1=100.0 * float(clean_correct.double().mean()),
        adv_top1=100.0 * float(adv_correct.double().mean()),
        ssim=float(torch.cat(ssims).mean()), psnr=float(torch.cat(psnrs).mean()),
        config_hash=config_hash, timestamp=timestamp or utc_timestamp(),
        num_samples=len(images), epsilon=budget.epsilon,
        lpips=sum(lp) / len(images) if lp else None, notes=notes,
    )
    if return_details:
        return record, {"clean_correct": clean_correct.numpy(), "adv_correct": adv_correct.numpy(),
                        "max_perturbation": max_pert}
    return record


# ---- difference map ------------------------------------------------------

@torch.no_grad()
def generator_saliency(generator, image):
    """Channel-averaged magnitude ``|sum_k F_k| / C`` of the down-sampling features."""
    generator.eval()
    x = torch.as_tensor(image).float()
    if x.ndim == 3:
        x = x[None]
    feats = generator.downsample_features(x)
    return feats.sum(1).abs() / feats.shape[1]


def difference_map(generator_a, generator_b, image):
    """Binary map, 1 where generator b's saliency exceeds generator a's.

    By convention ``a`` is the reference (baseline) generator and ``b`` the
    one under study.  Output shape is ``(N, h, w)`` of the down-sampling
    features.
    """
    if generator_a.config != generator_b.config:
        raise ConfigurationError(f"generator architectures differ: {generator_a.config} vs {generator_b.config}")
    fa = generator_saliency(generator_a, image)
    fb = generator_saliency(generator_b, image)
    return (fb - fa > 0).to(torch.uint8)


# ---- summaries -------------------------------------------------------------

def summarize(records, group_keys=("variant", "setting")):
    """Mean and standard deviation of adv_top1 per group.

    Within a group the per-seed means are taken first (averaging over
    victims), and the spread is the sample standard deviation across seeds.
    """
    groups = {}
    for r in records:
        if r.get("status", "ok") != "ok":
            continue
        key = tuple(r.get(k, "") for k in group_keys)
        groups.setdefault(key, {}).setdefault(r.get("seed"), []).append(r)
    rows = []
    for key, by_seed in sorted(groups.items()):
        seed_means = [np.mean([r["adv_top1"] for r in rs]) for rs in by_seed.values()]
        rs_all = [r for rs in by_seed.values() for r in rs]
        rows.append({
            **dict(zip(group_keys, key)),
            "n_seeds": len(seed_means),
            "n_records": len(rs_all),
            "clean_top1": float(np.mean([r["clean_top1"] for r in rs_all])),
            "adv_top1_mean": float(np.mean(seed_means)),
            "adv_top1_std": float(np.std(seed_means, ddof=1)) if len(seed_means) > 1 else 0.0,
            "ssim": float(np.mean([r["ssim"] for r in rs_all])),
            "psnr": float(np.mean([r["psnr"] for r in rs_all])),
        })
    return rows


def classify_setting(victim_id, victim_dataset, surrogate_id, train_dataset):
    if victim_dataset != train_dataset:
        return "cross-domain"
    if victim_id == surrogate_id:
        return "white-box"
    return "cross-model"
