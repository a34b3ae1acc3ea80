"""
A tour of the DCT band split
============================

The attack reasons about images in the orthonormal 2-D DCT domain.  This
script shows the transform, the three frequency bands and the mid / low+high
decomposition on one synthetic image, and saves a figure next to the script.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from facl import spectral
from facl.spectral import BandThresholds
from facl.synthetic import make_arrays

# one 32x32 image from the procedural "shapes" set
images, labels = make_arrays("shapes", 1, seed=3)
x = images[4].astype(np.float64)

# the transform is orthonormal, so it round-trips and preserves energy
coeffs = spectral.dct2(x)
print("round-trip error:", np.abs(spectral.idct2(coeffs) - x).max())
print("energy ratio:", (coeffs ** 2).sum() / (x ** 2).sum())

# thresholds are stated for 224 px images and rescale with the resolution
t = BandThresholds().scaled(32)
print("thresholds at 32 px:", t.f_low, t.f_high)

# band labels: 0 = low, 1 = mid, 2 = high, using f = max(u, v)
labels_grid = spectral.band_labels(t, (32, 32)).numpy()
print("coefficients per band:", np.bincount(labels_grid.ravel()))

# band-pass keeps the mid band, band-reject keeps the rest
mid, lowhigh = spectral.band_decompose(x, t)
print("decomposition error:", np.abs(mid + lowhigh - x).max())

fig, ax = plt.subplots(1, 5, figsize=(13, 3))
ax[0].imshow(x.transpose(1, 2, 0).astype(np.uint8))
ax[0].set_title("input")
ax[1].imshow(np.log1p(np.abs(coeffs)).mean(0), cmap="magma")
ax[1].set_title("log |DCT|")
ax[2].imshow(labels_grid, cmap="viridis")
ax[2].set_title("bands (low/mid/high)")
ax[3].imshow(np.clip(mid.transpose(1, 2, 0) + 127.5, 0, 255).astype(np.uint8))
ax[3].set_title("mid band (+127)")
ax[4].imshow(np.clip(lowhigh.transpose(1, 2, 0), 0, 255).astype(np.uint8))
ax[4].set_title("low + high")
for a in ax:
    a.axis("off")
fig.tight_layout()
fig.savefig("spectral_tour.png", dpi=100)
print("wrote spectral_tour.png")
