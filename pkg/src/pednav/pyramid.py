"""Multi-scale channel pyramid.

Channels are computed for real (resampled) images at every scale; no
power-law approximation across scales.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelStack, compute_channels
from .imgio import resize_bilinear

log = logging.getLogger(__name__)


@dataclass
class PyramidLevel:
    scale: float
    stack: ChannelStack


@dataclass
class Pyramid:
    levels: list = field(default_factory=list)
    scales_per_octave: int = 8
    undersized: bool = False

    def __len__(self):
        return len(self.levels)


def build_pyramid(img, window, shrink=4, scales_per_octave=8, smooth=True):
    """Channel stacks at scales 2^(-i / scales_per_octave), i = 0, 1, ...

    Scales stop once the rescaled image no longer fits one detector window of
    size ``window`` (w, h) in pixels. An input smaller than the window yields
    an empty pyramid flagged ``undersized``.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    win_w, win_h = window

    if w < win_w or h < win_h:
        log.warning("image %dx%d smaller than detector window %dx%d", w, h, win_w, win_h)
        return Pyramid(levels=[], scales_per_octave=scales_per_octave, undersized=True)

    levels = []
    i = 0
    while True:
        scale = 2.0 ** (-i / scales_per_octave)
        sw = int(round(scale * w))
        sh = int(round(scale * h))
        if sw < win_w or sh < win_h:
            break
        scaled = img if (sw, sh) == (w, h) else resize_bilinear(img, sh, sw)
        stack = compute_channels(scaled, shrink, smooth=smooth)
        levels.append(PyramidLevel(scale=scale, stack=stack))
        i += 1
    return Pyramid(levels=levels, scales_per_octave=scales_per_octave)
