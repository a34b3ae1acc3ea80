"""Slow reference implementations used only by the tests."""

import math

import numpy as np


def naive_dct2(x):
    """Definitional orthonormal 2-D DCT-II by explicit double sum, per channel."""
    x = np.asarray(x, dtype=np.float64)
    c, h, w = x.shape
    out = np.zeros_like(x)
    for ch in range(c):
        for u in range(h):
            au = math.sqrt(1 / h) if u == 0 else math.sqrt(2 / h)
            for v in range(w):
                av = math.sqrt(1 / w) if v == 0 else math.sqrt(2 / w)
                s = 0.0
                for i in range(h):
                    cu = math.cos(math.pi * (2 * i + 1) * u / (2 * h))
                    for j in range(w):
                        s += x[ch, i, j] * cu * math.cos(math.pi * (2 * j + 1) * v / (2 * w))
                out[ch, u, v] = au * av * s
    return out


def naive_ssim(a, b, window=8, peak=255.0):
    """Loop-based mean SSIM over every fully-contained window and channel."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    vals = []
    for ch in range(a.shape[0]):
        for i in range(a.shape[1] - window + 1):
            for j in range(a.shape[2] - window + 1):
                pa = a[ch, i:i + window, j:j + window]
                pb = b[ch, i:i + window, j:j + window]
                ma, mb = pa.mean(), pb.mean()
                va, vb = pa.var(), pb.var()
                cov = ((pa - ma) * (pb - mb)).mean()
                vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def central_difference_gradient(loss_fn, params, coords, h=1e-6):
    """Central differences of ``loss_fn()`` w.r.t. selected parameter entries.

    ``coords`` is a list of ``(param_index, flat_index)``; parameters are
    perturbed in place and restored.
    """
    import torch

    out = []
    with torch.no_grad():
        for pi, fi in coords:
            flat = params[pi].view(-1)
            orig = flat[fi].item()
            flat[fi] = orig + h
            up = float(loss_fn())
            flat[fi] = orig - h
            down = float(loss_fn())
            flat[fi] = orig
            out.append((up - down) / (2 * h))
    return np.array(out)
