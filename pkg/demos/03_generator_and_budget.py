"""
The generator and the perturbation budget
=========================================

The generator maps an image to an unbounded candidate; projection then
clips it into the L-infinity ball of radius epsilon around the clean image
and into the valid pixel range.  Every output therefore has PSNR of at
least 10 log10(255^2 / eps^2), 28.13 dB for eps = 10.
"""

import torch

from facl.evaluation import difference_map, image_quality, psnr
from facl.generator import Generator, GeneratorConfig, PerturbationBudget, project
from facl.synthetic import make_arrays

torch.manual_seed(0)
gen = Generator(GeneratorConfig(base_width=16, num_residual_blocks=2, input_resolution=32)).eval()
print("generator parameters:", sum(p.numel() for p in gen.parameters()))

images, _ = make_arrays("shapes", 2, seed=1)
x = torch.as_tensor(images).float()

with torch.no_grad():
    raw = gen(x)
adv = project(raw, x, PerturbationBudget(10))
print("raw output range:", float(raw.min()), float(raw.max()))
print("max |adv - x|:", float((adv - x).abs().max()))
print("min PSNR: %.2f dB" % float(psnr(x, adv).min()))
print("SSIM / PSNR means: %.3f / %.2f" % image_quality(x, adv))

# the worst case saturates every pixel at the budget
worst = project(x + 10 * torch.sign(torch.randn_like(x)), x, 10.0)
print("saturated PSNR: %.2f dB" % float(psnr(x[2:3], worst[2:3])))

# difference map between two generators' down-sampling features
torch.manual_seed(1)
other = Generator(gen.config).eval()
dm = difference_map(gen, other, x[:1])
print("difference map shape:", tuple(dm.shape), "fraction set:", float(dm.float().mean()))
print("identical generators:", int(difference_map(gen, gen, x[:1]).sum()), "set cells")
