"""Pure-numpy sliding-window scorer, the fallback for the compiled kernel.

Semantics are identical to the native kernel: trees are applied in order,
every window keeps a running score, and a window is abandoned as soon as its
running score drops below the reject threshold. Survivors carry the full
ensemble score. Per-window accumulation order matches the native kernel, so
the two backends produce bit-identical scores.
"""

import numpy as np


def score_windows(stack, win_cells, stride, feats, thresholds, leaves, reject):
    """Score every window position of one channel stack.

    stack:      (C, H, W) float64, C-contiguous
    win_cells:  (wc, hc) window footprint in cells
    stride:     window stride in cells
    feats:      (T, 3) int64, per-node feature offsets into the flattened
                (C, hc, wc) window footprint; nodes are [root, left, right]
    thresholds: (T, 3) float64 node thresholds
    leaves:     (T, 4) float64 leaf scores, ordered [ll, lr, rl, rr]
    reject:     running-score reject threshold (-inf disables the cascade)

    Returns (scores, alive): flat float64 / bool arrays over the window grid,
    rows varying slowest. alive marks windows that survived the cascade;
    their scores are full ensemble sums.
    """
    c, h, w = stack.shape
    wc, hc = win_cells
    ny = (h - hc) // stride + 1
    nx = (w - wc) // stride + 1
    if ny <= 0 or nx <= 0:
        return np.zeros(0), np.zeros(0, dtype=bool)

    flat = np.ascontiguousarray(stack).reshape(-1)
    ys, xs = np.meshgrid(
        np.arange(ny, dtype=np.int64) * stride,
        np.arange(nx, dtype=np.int64) * stride,
        indexing="ij",
    )
    bases = (ys * w + xs).reshape(-1)

    # window-footprint offsets -> stack offsets
    area = hc * wc
    chan = feats // area
    cy = (feats % area) // wc
    cx = feats % wc
    offs = chan * (h * w) + cy * w + cx

    n = bases.shape[0]
    scores = np.zeros(n)
    alive_idx = np.arange(n)
    live_bases = bases
    live_scores = scores[alive_idx]

    for t in range(feats.shape[0]):
        if live_bases.size == 0:
            break
        v0 = flat[live_bases + offs[t, 0]]
        go_left = v0 < thresholds[t, 0]
        v1 = flat[live_bases + offs[t, 1]]
        v2 = flat[live_bases + offs[t, 2]]
        out = np.where(
            go_left,
            np.where(v1 < thresholds[t, 1], leaves[t, 0], leaves[t, 1]),
            np.where(v2 < thresholds[t, 2], leaves[t, 2], leaves[t, 3]),
        )
        live_scores = live_scores + out
        keep = live_scores >= reject
        if not keep.all():
            scores[alive_idx] = live_scores
            alive_idx = alive_idx[keep]
            live_bases = live_bases[keep]
            live_scores = live_scores[keep]

    scores[alive_idx] = live_scores
    alive = np.zeros(n, dtype=bool)
    alive[alive_idx] = True
    return scores, alive
