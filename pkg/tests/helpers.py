"""Tiny float64 models for exact-arithmetic checks, plus acceptance reporting."""

import numpy as np
import torch

from facl.generator import Generator, GeneratorConfig
from facl.losses import FeaturePairSet, LossWeights, loss_facl, loss_orig, total_loss
from facl.models import build_model, freeze

from oracles import central_difference_gradient


def tiny_surrogate(resolution=16, seed=0, dtype=torch.float64):
    torch.manual_seed(seed)
    model = build_model("vgg", 10, resolution, (120.0,) * 3, (60.0,) * 3, width=2).to(dtype)
    # non-trivial running statistics so eval-mode batch norm is not the identity
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, torch.nn.BatchNorm2d):
                m.running_mean.uniform_(-0.2, 0.2)
                m.running_var.uniform_(0.5, 1.5)
    return freeze(model)


def tiny_generator(resolution=16, seed=0, dtype=torch.float64):
    torch.manual_seed(seed)
    return Generator(GeneratorConfig(3, 2, 1, resolution)).to(dtype)


def generator_objective(generator, surrogate, x, eps=255.0):
    """Total training loss as a function of the generator parameters."""
    from facl.generator import project
    from facl.spectral import BandThresholds, band_decompose
    from facl.training import tap_features

    t = BandThresholds(7, 112, 224)
    adv = project(generator(x), x, eps)
    l_orig = loss_orig(tap_features(surrogate, "maxpool3", x), tap_features(surrogate, "maxpool3", adv))
    mc, lc = band_decompose(x, t)
    ma, la = band_decompose(adv, t)
    pairs = FeaturePairSet(*(tap_features(surrogate, "conv4_1", v) for v in (mc, ma, lc, la)))
    return total_loss(l_orig, loss_facl(pairs), LossWeights(1.0, 1.0))


def check_generator_gradient(seed=0, n_coords=40):
    """Relative error between autograd and central differences."""
    gen = tiny_generator(seed=seed)
    gen.train()
    sur = tiny_surrogate(seed=seed)
    x = torch.rand(2, 3, 16, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(seed)) * 255
    params = [p for p in gen.parameters()]
    gen.zero_grad()
    generator_objective(gen, sur, x).backward()
    rng = np.random.default_rng(seed)
    coords = []
    for _ in range(n_coords):
        pi = int(rng.integers(len(params)))
        coords.append((pi, int(rng.integers(params[pi].numel()))))
    analytic = np.array([params[pi].grad.view(-1)[fi].item() for pi, fi in coords])
    numeric = central_difference_gradient(lambda: generator_objective(gen, sur, x), params, coords)
    return np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic)


ACCEPTANCE_LINES = []


def verdict(number, ok, detail):
    """Record and print one acceptance line, then fail the test if ``ok`` is false."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
