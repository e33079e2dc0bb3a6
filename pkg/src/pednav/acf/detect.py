"""Sliding-window detection over a channel pyramid, plus greedy NMS."""

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..boxes import BoundingBox, iou


@dataclass
class Proposal:
    box: BoundingBox
    score: float
    level: int


def detect(pyr, model, stride=1):
    """Run the ensemble over every pyramid level.

    Windows march at ``stride`` cells. A window dies as soon as its running
    score falls below the model's cascade reject threshold; windows whose
    final score reaches the acceptance threshold come back as proposals in
    original-image pixel coordinates. Output is unsorted and may contain
    overlapping duplicates; NMS is a separate step.
    """
    wc, hc = model.window_cells
    win_w, win_h = model.window
    out = []
    for li, level in enumerate(pyr.levels):
        stack = level.stack
        if stack.width < wc or stack.height < hc:
            continue
        scores, alive = kernels.score_windows(
            stack.data,
            (wc, hc),
            stride,
            model.features,
            model.thresholds,
            model.leaves,
            model.reject_threshold,
        )
        if scores.size == 0:
            continue
        nx = (stack.width - wc) // stride + 1
        keep = alive & (scores >= model.accept_threshold)
        idx = np.flatnonzero(keep)
        inv = 1.0 / level.scale
        for i in idx:
            iy, ix = divmod(int(i), nx)
            x = ix * stride * model.shrink * inv
            y = iy * stride * model.shrink * inv
            out.append(
                Proposal(
                    box=BoundingBox(x, y, win_w * inv, win_h * inv),
                    score=float(scores[i]),
                    level=li,
                )
            )
    return out


def nms(proposals, overlap_threshold=0.5):
    """Greedy non-maximum suppression.

    Keeps a proposal iff its IoU with every already-kept proposal stays at or
    below the threshold. Candidates are visited by descending score with a
    deterministic tie-break on (score, then x, then y ascending).
    """
    if not 0.0 < overlap_threshold < 1.0:
        raise ValueError(f"overlap threshold must be in (0, 1), got {overlap_threshold}")
    order = sorted(proposals, key=lambda p: (-p.score, p.box.x, p.box.y))
    kept = []
    for cand in order:
        if all(iou(cand.box, k.box) <= overlap_threshold for k in kept):
            kept.append(cand)
    return kept
