"""
Frequency-aware domain randomization
====================================

FADR adds pixel noise, then jitters the low and high DCT coefficients by a
random factor in [1 - rho, 1 + rho] while leaving the mid band alone.  Here
we check that on a real image and look at how strong the published
setting (rho = 0.01, sigma = 8) is compared with larger rho.
"""

import numpy as np

from facl import spectral
from facl.spectral import BandThresholds, RandomizationParams
from facl.synthetic import make_arrays

images, _ = make_arrays("glyphs", 1, seed=0)
x = images[:4].astype(np.float64)
t = BandThresholds()

# with sigma = 0 the mid band passes through untouched
params = RandomizationParams(rho=0.5, sigma=0.0, seed=7)
out = spectral.fadr_transform(x, t, params)
mid = spectral.band_labels(t.for_shape(x.shape), (32, 32)).numpy() == 1
delta = spectral.dct2(out) - spectral.dct2(x)
print("max mid-band change:", np.abs(delta[..., mid]).max())
print("max low/high change:", np.abs(delta[..., ~mid]).max())

# rho = sigma = 0 is the identity
ident = spectral.fadr_transform(x, t, RandomizationParams(0.0, 0.0))
print("identity error:", np.abs(ident - x).max())

# strength of the randomization for a few settings
for rho, sigma in [(0.01, 8.0), (0.1, 8.0), (0.5, 0.0), (0.0, 16.0)]:
    y = spectral.fadr_transform(x, t, RandomizationParams(rho, sigma, seed=1))
    rms = np.sqrt(((y - x) ** 2).mean())
    print(f"rho={rho:<5} sigma={sigma:<5} rms pixel change {rms:6.2f}")

# the same seed always gives the same draw; each image in a batch gets its own
m1, n1 = spectral.draw_fadr(RandomizationParams(seed=5), t, (3, 32, 32))
m2, n2 = spectral.draw_fadr(RandomizationParams(seed=5), t, (3, 32, 32))
print("reproducible draw:", bool((m1 == m2).all() and (n1 == n2).all()))
