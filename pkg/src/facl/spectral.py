"""Frequency-domain image operations.

Everything here works per channel on images shaped ``(C, H, W)`` or batches
shaped ``(N, C, H, W)``.  Inputs may be numpy arrays or torch tensors; numpy in
gives numpy out.  Torch inputs keep their autograd graph, so the band filters
can sit inside a training objective.

The scalar frequency of a 2-D coefficient index ``(u, v)`` is ``max(u, v)``,
which makes every band a nested square annulus around the DC term.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
import math

import numpy as np
import torch

from .errors import InvalidInputError, InvalidThresholdError

BANDS = ("low", "mid", "high")
MASK_KINDS = ("fadr_random", "band_pass", "band_reject")


def _to_tensor(x):
    if isinstance(x, torch.Tensor):
        return x, False
    arr = np.asarray(x)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    return torch.from_numpy(np.ascontiguousarray(arr)), True


def _restore(t, was_numpy):
    return t.detach().cpu().numpy() if was_numpy else t


def _check_image(x, name="image"):
    if x.ndim not in (3, 4):
        raise InvalidInputError(f"{name} must be (C, H, W) or (N, C, H, W), got shape {tuple(x.shape)}")
    if x.shape[-1] < 2 or x.shape[-2] < 2:
        raise InvalidInputError(f"{name} needs H >= 2 and W >= 2, got {tuple(x.shape[-2:])}")
    if not torch.isfinite(x).all():
        raise InvalidInputError(f"{name} contains non-finite values")


@lru_cache(maxsize=64)
def _dct_matrix_cached(n, dtype, device):
    k = torch.arange(n, dtype=torch.float64)[:, None]
    i = torch.arange(n, dtype=torch.float64)[None, :]
    mat = torch.cos(math.pi * (2 * i + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    mat[0] /= math.sqrt(2.0)
    return mat.to(dtype=dtype, device=device)


def dct_matrix(n, dtype=torch.float64, device="cpu"):
    """Orthonormal type-II DCT matrix; row ``k`` holds the k-th basis vector."""
    return _dct_matrix_cached(int(n), dtype, torch.device(device))


def dct2(image):
    """Orthonormal 2-D DCT-II applied to each channel (rows, then columns)."""
    x, was_numpy = _to_tensor(image)
    _check_image(x)
    dh = dct_matrix(x.shape[-2], x.dtype, x.device)
    dw = dct_matrix(x.shape[-1], x.dtype, x.device)
    return _restore(dh @ x @ dw.T, was_numpy)


def idct2(spectrum):
    """Inverse of :func:`dct2`."""
    y, was_numpy = _to_tensor(spectrum)
    _check_image(y, "spectrum")
    dh = dct_matrix(y.shape[-2], y.dtype, y.device)
    dw = dct_matrix(y.shape[-1], y.dtype, y.device)
    return _restore(dh.T @ y @ dw, was_numpy)


def frequency_index(u, v):
    """Scalar frequency of coefficient ``(u, v)``."""
    return max(u, v)


def frequency_grid(height, width):
    """Integer grid holding :func:`frequency_index` for every coefficient."""
    u = torch.arange(height)[:, None]
    v = torch.arange(width)[None, :]
    return torch.maximum(u, v)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class BandThresholds:
    """Low/high frequency cut-offs stated at ``base_resolution``.

    Coefficients with ``f < f_low`` are low band, ``f_low <= f < f_high`` mid
    band, and ``f >= f_high`` high band.
    """

    f_low: int = 7
    f_high: int = 112
    base_resolution: int = 224

    def __post_init__(self):
        if self.base_resolution <= 0:
            raise InvalidThresholdError(f"base_resolution must be positive, got {self.base_resolution}")
        if not 0 <= self.f_low < self.f_high <= self.base_resolution:
            raise InvalidThresholdError(
                f"need 0 <= f_low < f_high <= base_resolution, got "
                f"({self.f_low}, {self.f_high}, {self.base_resolution})"
            )

    def scaled(self, resolution):
        """Thresholds rescaled proportionally to ``resolution``.

        ``f_high`` is bumped to ``f_low + 1`` if rounding would collapse the
        mid band.
        """
        if resolution == self.base_resolution:
            return self
        lo = _round_half_up(self.f_low * resolution / self.base_resolution)
        hi = _round_half_up(self.f_high * resolution / self.base_resolution)
        hi = max(hi, lo + 1)
        if hi > resolution:
            raise InvalidThresholdError(
                f"thresholds ({self.f_low}, {self.f_high}) at {self.base_resolution} "
                f"do not fit resolution {resolution}"
            )
        return BandThresholds(lo, hi, resolution)

    def for_shape(self, shape):
        """Thresholds scaled to a ``(H, W)`` grid, validated against it."""
        height, width = int(shape[-2]), int(shape[-1])
        res = max(height, width)
        scaled = self.scaled(res)
        if scaled.f_high > res:
            raise InvalidThresholdError(f"f_high={scaled.f_high} exceeds grid extent {res}")
        return scaled


@dataclass(frozen=True)
class RandomizationParams:
    """Multiplicative mask jitter ``rho`` and additive pixel noise ``sigma``.

    ``jitter_bands`` names the bands whose coefficients receive random mask
    values; the default jitters low and high and keeps mid intact.
    """

    rho: float = 0.01
    sigma: float = 8.0
    seed: int = 0
    jitter_bands: tuple = ("low", "high")

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise InvalidInputError(f"rho must lie in [0, 1), got {self.rho}")
        if self.sigma < 0:
            raise InvalidInputError(f"sigma must be non-negative, got {self.sigma}")
        bad = set(self.jitter_bands) - set(BANDS)
        if bad:
            raise InvalidInputError(f"unknown bands in jitter_bands: {sorted(bad)}")
        object.__setattr__(self, "jitter_bands", tuple(b for b in BANDS if b in self.jitter_bands))

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass
class BandMask:
    values: torch.Tensor
    kind: str
    thresholds: BandThresholds = field(default=None)


def band_labels(thresholds, shape):
    """Integer grid: 0 for low, 1 for mid, 2 for high band coefficients."""
    t = thresholds.for_shape(shape)
    f = frequency_grid(shape[-2], shape[-1])
    labels = torch.ones_like(f)
    labels[f < t.f_low] = 0
    labels[f >= t.f_high] = 2
    return labels


def build_band_mask(thresholds, shape, kind, params=None, dtype=torch.float64):
    """Coefficient mask of a given kind on an ``(H, W)`` grid.

    ``fadr_random`` needs ``params``; its random values come from
    ``params.seed`` alone, so equal seeds give bit-identical masks.
    """
    if kind not in MASK_KINDS:
        raise InvalidInputError(f"unknown mask kind {kind!r}; expected one of {MASK_KINDS}")
    if (kind == "fadr_random") != (params is not None):
        raise InvalidInputError("params are required for fadr_random masks and only for them")
    height, width = int(shape[-2]), int(shape[-1])
    labels = band_labels(thresholds, (height, width))
    mid = labels == 1
    if kind == "band_pass":
        values = mid.to(dtype)
    elif kind == "band_reject":
        values = 1 - mid.to(dtype)
    else:
        values, _ = _draw(params, labels, (1, height, width), dtype)
    return BandMask(values, kind, thresholds.for_shape((height, width)))


def _draw(params, labels, image_shape, dtype):
    rng = np.random.default_rng(params.seed)
    mask = rng.uniform(1 - params.rho, 1 + params.rho, size=labels.shape)
    jitter = np.isin(labels.numpy(), [BANDS.index(b) for b in params.jitter_bands])
    mask = np.where(jitter, mask, 1.0)
    noise = params.sigma * rng.standard_normal(size=image_shape)
    return torch.from_numpy(mask).to(dtype), torch.from_numpy(noise).to(dtype)


def draw_fadr(params, thresholds, image_shape, dtype=torch.float64):
    """The (mask, noise) pair that :func:`fadr_transform` uses for one image."""
    labels = band_labels(thresholds, image_shape)
    return _draw(params, labels, tuple(image_shape), dtype)


def _fadr_single(x, thresholds, params):
    mask, noise = draw_fadr(params, thresholds, tuple(x.shape), x.dtype)
    mask, noise = mask.to(x.device), noise.to(x.device)
    return idct2(dct2(x + noise) * mask)


def fadr_transform(image, thresholds, params):
    """Frequency-aware domain randomization of one image or a batch.

    Adds Gaussian pixel noise, scales the DCT coefficients by a random mask
    that is exactly one on the mid band, and transforms back.  The output is
    not clamped.  For a batch, image ``i`` uses a seed spawned from
    ``params.seed`` and ``i``.
    """
    x, was_numpy = _to_tensor(image)
    _check_image(x)
    if x.ndim == 3:
        out = _fadr_single(x, thresholds, params)
    else:
        seeds = np.random.SeedSequence(params.seed).spawn(x.shape[0])
        out = torch.stack([
            _fadr_single(xi, thresholds, params.with_seed(s.generate_state(1)[0]))
            for xi, s in zip(x, seeds)
        ])
    return _restore(out, was_numpy)


def band_decompose(image, thresholds):
    """Split an image into its mid-band part and its low/high-band part.

    The two outputs sum to the input up to round-off.
    """
    x, was_numpy = _to_tensor(image)
    _check_image(x)
    band_pass = build_band_mask(thresholds, x.shape, "band_pass", dtype=x.dtype).values.to(x.device)
    spec = dct2(x)
    mid = idct2(spec * band_pass)
    lowhigh = idct2(spec * (1 - band_pass))
    return _restore(mid, was_numpy), _restore(lowhigh, was_numpy)
