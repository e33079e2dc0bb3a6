"""Synthetic 8-class silhouette dataset for auxiliary pretraining.

Classes: 0 disk, 1 square, 2 triangle, 3 horizontal bar, 4 vertical bar,
5 plus, 6 ring, 7 diamond. Each sample jitters position, size, foreground
and background intensity, plus light pixel noise, so the net has to learn
shape rather than brightness.
"""

import numpy as np

N_SHAPE_CLASSES = 8
SIDE = 64


def _mask(cls, cx, cy, r, side):
    ys, xs = np.mgrid[0:side, 0:side]
    dx, dy = xs - cx, ys - cy
    if cls == 0:
        return dx**2 + dy**2 <= r**2
    if cls == 1:
        return (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if cls == 2:
        return (dy >= -r) & (dy <= r) & (np.abs(dx) <= (dy + r) / 2)
    if cls == 3:
        return (np.abs(dx) <= r) & (np.abs(dy) <= r / 3)
    if cls == 4:
        return (np.abs(dx) <= r / 3) & (np.abs(dy) <= r)
    if cls == 5:
        return ((np.abs(dx) <= r / 3) & (np.abs(dy) <= r)) | (
            (np.abs(dx) <= r) & (np.abs(dy) <= r / 3)
        )
    if cls == 6:
        d2 = dx**2 + dy**2
        return (d2 <= r**2) & (d2 >= (0.55 * r) ** 2)
    if cls == 7:
        return np.abs(dx) + np.abs(dy) <= r
    raise ValueError(f"unknown shape class {cls}")


def make_shape_dataset(n_per_class, seed=0, side=SIDE):
    """Returns (x (N, side, side, 3) float64 in [0,1], y (N,) int64)."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for cls in range(N_SHAPE_CLASSES):
        for _ in range(n_per_class):
            bg = rng.uniform(0.0, 0.35)
            fg = rng.uniform(0.55, 1.0)
            tint = rng.uniform(0.8, 1.2, size=3)
            cx = side / 2 + rng.uniform(-6, 6)
            cy = side / 2 + rng.uniform(-6, 6)
            r = rng.uniform(0.22, 0.38) * side
            img = np.full((side, side, 3), bg)
            img[_mask(cls, cx, cy, r, side)] = fg
            img = np.clip(img * tint + rng.normal(0, 0.02, size=(side, side, 3)), 0, 1)
            images.append(img)
            labels.append(cls)
    order = rng.permutation(len(images))
    return np.stack(images)[order], np.asarray(labels, dtype=np.int64)[order]
