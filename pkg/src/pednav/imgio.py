"""Image loading and resampling.

Images are numpy float64 arrays of shape (H, W, 3) with values in [0, 1].
PNG decoding goes through Pillow; binary PPM (P6) is parsed directly.
"""

import re
from pathlib import Path

import numpy as np

__all__ = ["load_image", "save_ppm", "resize_bilinear", "validate_image"]


def validate_image(img, depth=None):
    """Check array shape/range and return it as float64 (H, W, C)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise ValueError(f"expected (H, W, C) image, got shape {img.shape}")
    if depth is not None and img.shape[2] != depth:
        raise ValueError(f"expected {depth}-channel image, got {img.shape[2]}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values outside [0, 1]")
    return img


def load_image(path):
    """Read a PNG or binary PPM (P6) file into a float64 RGB array."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        return _read_ppm(path)
    from PIL import Image as PILImage

    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def _read_ppm(path):
    data = Path(path).read_bytes()
    # header: magic, width, height, maxval; comments start with '#'
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.match(rb"\s*(#[^\n]*\n|\S+)", data[pos:])
        if m is None:
            raise ValueError(f"{path}: truncated PPM header")
        pos += m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    if tokens[0] != b"P6":
        raise ValueError(f"{path}: not a binary PPM (P6) file")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"{path}: unsupported PPM maxval {maxval}")
    # exactly one whitespace byte separates the maxval token from the raster
    if pos >= len(data) or data[pos : pos + 1] not in b" \t\r\n":
        raise ValueError(f"{path}: malformed PPM header terminator")
    pos += 1
    needed = width * height * 3
    if len(data) - pos < needed:
        raise ValueError(f"{path}: truncated PPM pixel data")
    pixels = np.frombuffer(data, dtype=np.uint8, count=needed, offset=pos)
    return pixels.reshape(height, width, 3).astype(np.float64) / maxval


def save_ppm(path, img):
    """Write a float RGB array as binary PPM (P6)."""
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    raw = (img * 255.0 + 0.5).astype(np.uint8)
    h, w = raw.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(raw.tobytes())


def resize_bilinear(img, out_h, out_w):
    """Bilinear resampling with center-aligned sample grids.

    Destination pixel (i, j) samples the source at
    ((i + 0.5) * H / out_h - 0.5, (j + 0.5) * W / out_w - 0.5), clamped to the
    image. Resizing to the identical size reproduces the input exactly.
    """
    img = np.asarray(img, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    h, w = img.shape[:2]
    if (out_h, out_w) == (h, w):
        out = img.copy()
        return out[:, :, 0] if squeeze else out

    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]

    top = img[y0][:, x0] * (1.0 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1.0 - fx) + img[y1][:, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return out[:, :, 0] if squeeze else out
