"""Procedural 10-class image datasets for offline desk-scale experiments.

``shapes`` draws geometric figures and periodic textures on cluttered
backgrounds.  ``glyphs`` renders the handwritten digits bundled with
scikit-learn in random colours and positions.  The two label spaces are
disjoint, so a generator trained on one and evaluated on the other is a
miniature cross-domain transfer setting.
"""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFilter

SHAPE_CLASSES = ("circle", "square", "triangle", "cross", "ring",
                 "hstripes", "vstripes", "checker", "diagonal", "dots")
GLYPH_CLASSES = tuple(f"digit{i}" for i in range(10))


def _colour_pair(rng):
    while True:
        fg = rng.integers(0, 256, 3)
        bg = rng.integers(0, 256, 3)
        if np.abs(fg.astype(int) - bg.astype(int)).sum() > 200:
            return tuple(int(c) for c in fg), tuple(int(c) for c in bg)


def _luma(c):
    return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]


def _bright_on_dark(rng, margin=90):
    # glyphs keep one contrast polarity so stroke structure, not colour, carries the label
    while True:
        fg, bg = _colour_pair(rng)
        if _luma(bg) > _luma(fg):
            fg, bg = bg, fg
        if _luma(fg) - _luma(bg) > margin:
            return fg, bg


def _background(rng, size, bg):
    yy, xx = np.mgrid[0:size, 0:size] / size
    angle = rng.uniform(0, 2 * np.pi)
    ramp = (np.cos(angle) * xx + np.sin(angle) * yy)[..., None]
    img = np.asarray(bg, float)[None, None, :] + rng.uniform(-40, 40, 3) * ramp
    img += rng.normal(0, rng.uniform(2, 10), (size, size, 3))
    return img


def _finish(rng, canvas_rgb, alpha, bg_img):
    fg = np.asarray(canvas_rgb, float)
    a = np.asarray(alpha, float)[..., None] / 255.0
    out = a * fg + (1 - a) * bg_img
    out += rng.normal(0, 3, out.shape)
    return np.clip(out, 0, 255).astype(np.uint8)


def render_shape(cls, rng, size=32):
    """One ``(size, size, 3)`` uint8 image of shape class ``cls``."""
    fg, bg = _colour_pair(rng)
    scale = 4
    big = size * scale
    alpha = Image.new("L", (big, big), 0)
    draw = ImageDraw.Draw(alpha)
    r = rng.uniform(0.22, 0.36) * big
    cx, cy = rng.uniform(r, big - r, 2)
    period = rng.uniform(5, 9) * scale
    phase = rng.uniform(0, period)
    if cls == "circle":
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=255)
    elif cls == "square":
        draw.rectangle([cx - r, cy - r, cx + r, cy + r], fill=255)
    elif cls == "triangle":
        theta = rng.uniform(0, 2 * np.pi)
        pts = [(cx + r * np.cos(theta + k * 2 * np.pi / 3), cy + r * np.sin(theta + k * 2 * np.pi / 3)) for k in range(3)]
        draw.polygon(pts, fill=255)
    elif cls == "cross":
        t = r * 0.35
        draw.rectangle([cx - r, cy - t, cx + r, cy + t], fill=255)
        draw.rectangle([cx - t, cy - r, cx + t, cy + r], fill=255)
    elif cls == "ring":
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=255)
        ri = r * 0.55
        draw.ellipse([cx - ri, cy - ri, cx + ri, cy + ri], fill=0)
    elif cls in ("hstripes", "vstripes", "diagonal", "checker"):
        yy, xx = np.mgrid[0:big, 0:big].astype(float)
        if cls == "hstripes":
            field = (yy + phase) % period < period / 2
        elif cls == "vstripes":
            field = (xx + phase) % period < period / 2
        elif cls == "diagonal":
            field = (xx + yy + phase) % (1.4 * period) < 0.7 * period
        else:
            field = (((xx + phase) // period) + ((yy + phase) // period)) % 2 == 0
        alpha = Image.fromarray((field * 255).astype(np.uint8))
    elif cls == "dots":
        step = period * 1.3
        for y in np.arange(phase, big, step):
            for x in np.arange(phase, big, step):
                d = step * 0.28
                draw.ellipse([x - d, y - d, x + d, y + d], fill=255)
    else:
        raise ValueError(f"unknown shape class {cls!r}")
    alpha = alpha.filter(ImageFilter.GaussianBlur(scale * 0.5)).resize((size, size), Image.BILINEAR)
    canvas = np.broadcast_to(np.asarray(fg, float), (size, size, 3))
    return _finish(rng, canvas, alpha, _background(rng, size, bg))


def _digit_bitmaps():
    from sklearn.datasets import load_digits

    digits = load_digits()
    return digits.images, digits.target


def render_glyph(bitmap, rng, size=32):
    """Colourise and place one 8x8 digit bitmap (values 0..16)."""
    fg, bg = _bright_on_dark(rng)
    glyph = Image.fromarray((np.asarray(bitmap) / 16 * 255).astype(np.uint8))
    side = int(rng.integers(22, 29))
    glyph = glyph.resize((side, side), Image.BICUBIC).rotate(rng.uniform(-10, 10), resample=Image.BILINEAR)
    alpha = Image.new("L", (size, size), 0)
    ox, oy = rng.integers(0, size - side + 1, 2)
    alpha.paste(glyph, (int(ox), int(oy)))
    canvas = np.broadcast_to(np.asarray(fg, float), (size, size, 3))
    return _finish(rng, canvas, alpha, _background(rng, size, bg))


def make_arrays(kind, n_per_class, seed=0, size=32):
    """Render a dataset in memory: ``(uint8 images (N, 3, S, S), labels)``."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    if kind == "shapes":
        for _ in range(n_per_class):
            for label, cls in enumerate(SHAPE_CLASSES):
                images.append(render_shape(cls, rng, size))
                labels.append(label)
    elif kind == "glyphs":
        bitmaps, targets = _digit_bitmaps()
        by_class = [np.flatnonzero(targets == c) for c in range(10)]
        for _ in range(n_per_class):
            for label in range(10):
                idx = rng.choice(by_class[label])
                images.append(render_glyph(bitmaps[idx], rng, size))
                labels.append(label)
    else:
        raise ValueError(f"unknown synthetic dataset kind {kind!r}")
    return np.stack(images).transpose(0, 3, 1, 2).copy(), np.array(labels, dtype=np.int64)


def write_image_folder(root, kind, n_train_per_class, n_test_per_class, seed=0, size=32):
    """Render a dataset as PNG files in the ``root/{train,test}/<class>/`` layout."""
    root = Path(root)
    names = SHAPE_CLASSES if kind == "shapes" else GLYPH_CLASSES
    for split, n, split_seed in (("train", n_train_per_class, seed), ("test", n_test_per_class, seed + 10_000)):
        images, labels = make_arrays(kind, n, split_seed, size)
        counters = {}
        for img, lab in zip(images, labels):
            d = root / split / names[lab]
            d.mkdir(parents=True, exist_ok=True)
            k = counters.get(lab, 0)
            counters[lab] = k + 1
            Image.fromarray(img.transpose(1, 2, 0)).save(d / f"{k:05d}.png")
    return root
