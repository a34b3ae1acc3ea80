"""Generator training: half-batch augmentation, projection and contrastive losses."""

from dataclasses import dataclass, field
import json
import logging
import math
import time

import numpy as np
import torch

from . import spectral
from .config import derive_seed
from .errors import ConfigurationError, TrainingError
from .generator import Generator, project, save_generator
from .losses import FeaturePairSet, loss_facl, loss_orig, total_loss
from .models import extract_features, parameter_checksum
from .runs import MetricsWriter

logger = logging.getLogger(__name__)

VARIANTS = ("baseline", "fadr_only", "facl_only", "full", "low_rand", "mid_rand", "high_rand", "all_rand")
BAND_VARIANTS = {
    "low_rand": ("low",),
    "mid_rand": ("mid",),
    "high_rand": ("high",),
    "all_rand": ("low", "mid", "high"),
}


def make_ablation_config(base, variant):
    """Derive the config of one ablation variant from ``base``.

    ``baseline`` drops both the augmentation and the contrastive term;
    ``fadr_only`` and ``facl_only`` keep one of the two; the ``*_rand``
    variants keep augmentation only and jitter the named band(s).
    """
    if variant == "full":
        return base
    if variant == "baseline":
        return base.replace(lambda_facl=0.0, rho=0.0, sigma=0.0)
    if variant == "fadr_only":
        return base.replace(lambda_facl=0.0)
    if variant == "facl_only":
        return base.replace(rho=0.0, sigma=0.0)
    if variant in BAND_VARIANTS:
        return base.replace(lambda_facl=0.0, jitter_bands=BAND_VARIANTS[variant])
    raise ConfigurationError(f"unknown ablation variant {variant!r}; known: {VARIANTS}")


def _pool(features, pooling):
    if pooling == "avgpool":
        return features.mean(dim=(-2, -1))
    return features.flatten(1)


def tap_features(surrogate, tap, images, pooling="flatten"):
    if pooling == "flatten":
        return extract_features(surrogate, tap, images)
    return _pool(surrogate.features(images, tap), pooling)


@dataclass
class TrainState:
    generator: Generator
    surrogate: torch.nn.Module
    optimizer: torch.optim.Optimizer
    config: object
    step: int = 0
    history: list = field(default_factory=list)


def init_state(config, surrogate, resolution):
    for tap in (config.orig_tap, config.facl_tap):
        if tap not in surrogate.stages:
            raise ConfigurationError(f"surrogate {surrogate.arch} has no tap {tap!r}; taps: {surrogate.tap_names}")
    torch.manual_seed(derive_seed(config.seed, "init"))
    generator = Generator(config.generator_config(resolution))
    generator.train()
    optimizer = torch.optim.Adam(generator.parameters(), lr=config.learning_rate,
                                 betas=(config.adam_beta1, config.adam_beta2))
    return TrainState(generator, surrogate, optimizer, config)


def augment_batch(batch, config, step):
    """FADR-transform the first ``floor(N * augment_fraction)`` samples.

    Returns ``(augmented batch, number transformed)``.  With ``rho = sigma = 0``
    the batch is returned untouched and nothing counts as transformed.
    """
    n_aug = int(math.floor(len(batch) * config.augment_fraction))
    if not config.augmentation_enabled or n_aug == 0:
        return batch, 0
    params = config.randomization.with_seed(derive_seed(config.randomization.seed, step))
    head = spectral.fadr_transform(batch[:n_aug].double(), config.thresholds, params).to(batch.dtype)
    return torch.cat([head, batch[n_aug:]]), n_aug


def _facl_pairs(surrogate, config, clean, adv):
    mid_c, lh_c = spectral.band_decompose(clean, config.thresholds)
    mid_a, lh_a = spectral.band_decompose(adv, config.thresholds)
    feats = tap_features(surrogate, config.facl_tap, torch.cat([mid_c, mid_a, lh_c, lh_a]), config.feature_pooling)
    return FeaturePairSet(*feats.chunk(4))


def train_step(state, batch):
    """One update of the generator on a raw-pixel batch ``(N, 3, H, W)``.

    Returns the step metrics.  Raises TrainingError on a non-finite loss or a
    budget violation.
    """
    cfg = state.config
    batch = torch.as_tensor(batch).float()
    clean, n_aug = augment_batch(batch, cfg, state.step)
    adv = project(state.generator(clean), clean, cfg.budget)
    max_pert = float((adv.detach() - clean).abs().max())
    if max_pert > cfg.epsilon:
        raise TrainingError(f"projection violated the budget: {max_pert} > {cfg.epsilon}", {"step": state.step})

    f_clean = tap_features(state.surrogate, cfg.orig_tap, clean, cfg.feature_pooling)
    f_adv = tap_features(state.surrogate, cfg.orig_tap, adv, cfg.feature_pooling)
    l_orig = loss_orig(f_clean, f_adv)
    if cfg.lambda_facl > 0:
        l_facl = loss_facl(_facl_pairs(state.surrogate, cfg, clean, adv))
    else:
        with torch.no_grad():
            l_facl = loss_facl(_facl_pairs(state.surrogate, cfg, clean, adv.detach()))
    loss = total_loss(l_orig, l_facl, cfg.weights)

    state.optimizer.zero_grad()
    loss.backward()
    state.optimizer.step()
    metrics = {
        "step": state.step,
        "loss_orig": float(l_orig.detach()),
        "loss_facl": float(l_facl.detach()),
        "loss_total": float(loss.detach()),
        "n_augmented": n_aug,
        "max_perturbation": max_pert,
    }
    state.step += 1
    state.history.append(metrics)
    return metrics


def baseline_step(state, batch):
    """Plain mid-layer feature-separation update (no augmentation, no band terms).

    Kept as an independent code path to check the ablation ``baseline``
    configuration against.
    """
    cfg = state.config
    x = torch.as_tensor(batch).float()
    adv = project(state.generator(x), x, cfg.budget)
    loss = loss_orig(tap_features(state.surrogate, cfg.orig_tap, x, cfg.feature_pooling),
                     tap_features(state.surrogate, cfg.orig_tap, adv, cfg.feature_pooling))
    state.optimizer.zero_grad()
    loss.backward()
    state.optimizer.step()
    state.step += 1
    return {"step": state.step - 1, "loss_orig": float(loss.detach())}


def iterate_batches(n_items, config):
    """Yield index arrays for every step of the run, shuffled per epoch."""
    rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n_items)
        for start in range(0, n_items, config.batch_size):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2:
                continue  # batch norm needs two samples
            if config.max_steps is not None and step >= config.max_steps:
                return
            yield idx
            step += 1


def train(config, images, surrogate, run_dir=None):
    """Train a generator on uint8 ``images`` against a frozen surrogate.

    Writes ``metrics.csv`` and ``generator.pt`` (plus periodic checkpoints
    when ``checkpoint_every`` is set) into ``run_dir`` if given.  Returns
    ``(generator, summary dict)``.
    """
    images = np.asarray(images)
    if images.ndim != 4 or len(images) == 0:
        raise ConfigurationError(f"training images must be a non-empty (N, 3, H, W) array, got {images.shape}")
    checksum_before = parameter_checksum(surrogate)
    state = init_state(config, surrogate, images.shape[-1])
    writer = MetricsWriter(run_dir / "metrics.csv") if run_dir is not None else None
    start = time.time()
    idx = None
    try:
        for idx in iterate_batches(len(images), config):
            metrics = train_step(state, torch.from_numpy(images[idx]))
            if writer:
                writer.append(metrics)
            if config.checkpoint_every and run_dir is not None and state.step % config.checkpoint_every == 0:
                save_generator(run_dir / f"generator_step{state.step:06d}.pt", state.generator, config.hash())
            if state.step % 50 == 0:
                logger.info("step %d loss %.4f", state.step, metrics["loss_total"])
    except TrainingError as exc:
        if run_dir is not None:
            failure = {"step": state.step, "batch_indices": None if idx is None else idx.tolist(),
                       "error": str(exc), "diagnostics": exc.diagnostics, "config_hash": config.hash()}
            (run_dir / "failure.json").write_text(json.dumps(failure, indent=1, default=str))
        raise
    if parameter_checksum(surrogate) != checksum_before:
        raise TrainingError("surrogate parameters changed during generator training")
    state.generator.eval()
    summary = {
        "steps": state.step,
        "seconds": time.time() - start,
        "config_hash": config.hash(),
        "final_loss_orig": state.history[-1]["loss_orig"] if state.history else None,
        "final_loss_facl": state.history[-1]["loss_facl"] if state.history else None,
        "surrogate_checksum": checksum_before,
    }
    if run_dir is not None:
        save_generator(run_dir / "generator.pt", state.generator, config.hash(),
                       {"summary": summary, "epsilon": config.epsilon})
    return state.generator, summary
