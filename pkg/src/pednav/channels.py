"""Aggregated feature channels: LUV color, gradient magnitude and orientation.

The 10-channel set is 3 LUV + 1 gradient magnitude + 6 orientation bins.
All channels are block-summed into shrink-by-shrink cells and smoothed with a
normalized [1 2 1]/4 triangle filter.

LUV constants: sRGB with D65 white point. After conversion the channels are
affinely rescaled to [0, 1] with

    L' = L / 100,   u' = (u + 100) / 300,   v' = (v + 140) / 300

and clamped. The achromatic point therefore sits at u' = 1/3, v' = 7/15.
"""

from dataclasses import dataclass

import numpy as np

N_CHANNELS = 10
ORIENT_BINS = 6

# sRGB (linear) -> XYZ, D65
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_U = 4.0 * 0.95047 / (0.95047 + 15.0 + 3.0 * 1.08883)
_WHITE_V = 9.0 / (0.95047 + 15.0 + 3.0 * 1.08883)


@dataclass
class ChannelStack:
    """Channel cells for one image scale, laid out (channels, height, width)."""

    data: np.ndarray
    shrink: int

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]


def rgb_to_luv(img):
    """Convert an RGB image in [0,1] to rescaled LUV in [0,1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"rgb_to_luv expects (H, W, 3), got {img.shape}")

    lin = np.where(img <= 0.04045, img / 12.92, ((img + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB2XYZ.T
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]

    yr = y  # white point Y = 1
    fy = np.where(yr > (6.0 / 29.0) ** 3, np.cbrt(yr), yr / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lum = 116.0 * fy - 16.0
    lum = np.maximum(lum, 0.0)

    denom = x + 15.0 * y + 3.0 * z
    # achromatic fallback at zero energy keeps u = v = 0 there
    safe = denom > 1e-12
    up = np.where(safe, 4.0 * x / np.where(safe, denom, 1.0), _WHITE_U)
    vp = np.where(safe, 9.0 * y / np.where(safe, denom, 1.0), _WHITE_V)
    u = 13.0 * lum * (up - _WHITE_U)
    v = 13.0 * lum * (vp - _WHITE_V)

    out = np.stack([lum / 100.0, (u + 100.0) / 300.0, (v + 140.0) / 300.0], axis=-1)
    return np.clip(out, 0.0, 1.0)


def gradient_channels(img):
    """Gradient magnitude plus 6 orientation channels from a 3-channel image.

    Channel 0 is the per-pixel maximum over the input channels of the centered
    difference gradient magnitude (one-sided at borders). Channels 1..6 split
    that magnitude over orientation bins covering [0, pi) with linear
    interpolation between the two adjacent bins, so the orientation channels
    sum back to the magnitude channel.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"gradient_channels expects (H, W, 3), got {img.shape}")
    h, w = img.shape[:2]

    gx = np.empty_like(img)
    gx[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
    gx[:, 0] = img[:, 1] - img[:, 0] if w > 1 else 0.0
    gx[:, -1] = img[:, -1] - img[:, -2] if w > 1 else 0.0
    gy = np.empty_like(img)
    gy[1:-1] = 0.5 * (img[2:] - img[:-2])
    gy[0] = img[1] - img[0] if h > 1 else 0.0
    gy[-1] = img[-1] - img[-2] if h > 1 else 0.0

    mag_all = np.sqrt(gx * gx + gy * gy)
    best = np.argmax(mag_all, axis=2)
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    mag = mag_all[ii, jj, best]
    bgx = gx[ii, jj, best]
    bgy = gy[ii, jj, best]

    theta = np.arctan2(bgy, bgx) % np.pi
    pos = theta * (ORIENT_BINS / np.pi)
    lo = np.floor(pos).astype(np.int64) % ORIENT_BINS
    frac = pos - np.floor(pos)
    hi = (lo + 1) % ORIENT_BINS

    out = np.zeros((h, w, 1 + ORIENT_BINS))
    out[:, :, 0] = mag
    flat = out.reshape(-1, 1 + ORIENT_BINS)
    idx = np.arange(h * w)
    flat[idx, 1 + lo.ravel()] += mag.ravel() * (1.0 - frac.ravel())
    flat[idx, 1 + hi.ravel()] += mag.ravel() * frac.ravel()
    return out


def aggregate(img, shrink, smooth=True):
    """Block-sum each channel into shrink x shrink cells.

    Inputs whose size is not a multiple of shrink are padded by edge
    replication first. With smooth=True each cell channel then gets one pass
    of separable [1 2 1]/4 smoothing (replicated borders).
    """
    if shrink < 1 or int(shrink) != shrink:
        raise ValueError(f"shrink must be a positive integer, got {shrink}")
    shrink = int(shrink)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w, c = img.shape

    pad_h = (-h) % shrink
    pad_w = (-w) % shrink
    if pad_h or pad_w:
        img = np.pad(img, ((0, pad_h), (0, pad_w), (0, 0)), mode="edge")
        h, w = img.shape[:2]

    cells = img.reshape(h // shrink, shrink, w // shrink, shrink, c).sum(axis=(1, 3))
    data = np.ascontiguousarray(cells.transpose(2, 0, 1))
    if smooth:
        data = _smooth_121(data)
    return ChannelStack(data=data, shrink=shrink)


def _smooth_121(data):
    """Separable [1 2 1]/4 filter over the two spatial axes, edges replicated."""
    p = np.pad(data, ((0, 0), (1, 1), (0, 0)), mode="edge")
    data = 0.25 * p[:, :-2] + 0.5 * p[:, 1:-1] + 0.25 * p[:, 2:]
    p = np.pad(data, ((0, 0), (0, 0), (1, 1)), mode="edge")
    return 0.25 * p[:, :, :-2] + 0.5 * p[:, :, 1:-1] + 0.25 * p[:, :, 2:]


def compute_channels(img, shrink, smooth=True):
    """Full 10-channel stack for an RGB image: LUV, then gradients on LUV."""
    luv = rgb_to_luv(img)
    grad = gradient_channels(luv)
    return aggregate(np.concatenate([luv, grad], axis=2), shrink, smooth=smooth)
