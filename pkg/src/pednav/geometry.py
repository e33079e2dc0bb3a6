"""Ground-plane geometry: foot points, homography calibration, projection.

All world measurements live on the floor plane, so a single plane-to-plane
homography (image pixels to ground meters) replaces full camera pose.
Calibration runs a normalized direct linear transform over point
correspondences; the correspondence file format is one `u v X Y` line per
pair, `#` comments and blank lines ignored.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

HORIZON_EPS = 1e-12


@dataclass
class Homography:
    """3x3 image-to-ground map; `rms` is the calibration reprojection RMS."""

    h: np.ndarray
    rms: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        if self.h.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {self.h.shape}")
        if not np.isfinite(self.h).all():
            raise ValueError("homography has non-finite entries")
        if abs(np.linalg.det(self.h)) <= 1e-12:
            raise ValueError("homography is singular")

    def inverse(self):
        return Homography(np.linalg.inv(self.h))


def foot_point(box):
    """Bottom-center of a box: the pixel assumed to touch the floor."""
    return (box.x + box.w / 2.0, box.y + box.h)


def project_to_floor(point, hom):
    """Map an image point to ground-plane meters.

    Raises ValueError for points at the horizon (homogeneous scale ~ 0);
    callers drop such detections.
    """
    u, v = point
    vec = hom.h @ np.array([u, v, 1.0])
    if abs(vec[2]) < HORIZON_EPS:
        raise ValueError(f"image point ({u}, {v}) projects to the horizon")
    return np.array([vec[0] / vec[2], vec[1] / vec[2]])


def project_points(points, hom):
    """Vectorized projection; drops horizon points with a log entry.

    Returns (world (M,2), keep mask (N,)) for input (N,2).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    homog = np.column_stack([pts, np.ones(len(pts))]) @ hom.h.T
    keep = np.abs(homog[:, 2]) >= HORIZON_EPS
    if not keep.all():
        log.warning("dropped %d detections at the horizon", int((~keep).sum()))
    world = homog[keep, :2] / homog[keep, 2:3]
    return world, keep


def _collinear_triple(pts, tol=1e-9):
    """Index triple lying on one line, or None. Scale-aware test."""
    pts = np.asarray(pts, dtype=np.float64)
    span = max(np.ptp(pts, axis=0).max(), 1.0)
    for i, j, k in combinations(range(len(pts)), 3):
        a, b, c = pts[i], pts[j], pts[k]
        area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        if area2 <= tol * span * span:
            return (i, j, k)
    return None


def _normalizer(pts):
    """Similarity transform taking points to centroid 0, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    s = np.sqrt(2.0) / max(d, 1e-12)
    t = np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])
    return t


def calibrate_homography(image_points, world_points):
    """Normalized DLT from >= 4 image/world correspondences.

    Minimal 4-point sets are rejected when any 3 points are collinear on
    either side (the system is degenerate there); larger sets are checked
    through the conditioning of the design matrix.
    """
    img = np.asarray(image_points, dtype=np.float64).reshape(-1, 2)
    wld = np.asarray(world_points, dtype=np.float64).reshape(-1, 2)
    if len(img) != len(wld):
        raise ValueError("correspondence lists differ in length")
    n = len(img)
    if n < 4:
        raise ValueError(f"need at least 4 correspondences, got {n}")
    if n == 4:
        for name, pts in (("image", img), ("world", wld)):
            bad = _collinear_triple(pts)
            if bad is not None:
                raise ValueError(
                    f"degenerate calibration: {name} points {bad[0]}, {bad[1]}, "
                    f"{bad[2]} are collinear"
                )

    t_img = _normalizer(img)
    t_wld = _normalizer(wld)
    ih = np.column_stack([img, np.ones(n)]) @ t_img.T
    wh = np.column_stack([wld, np.ones(n)]) @ t_wld.T

    a = np.zeros((2 * n, 9))
    for i in range(n):
        x = ih[i]
        xp, yp, wp = wh[i]
        a[2 * i, 3:6] = -wp * x
        a[2 * i, 6:9] = yp * x
        a[2 * i + 1, 0:3] = wp * x
        a[2 * i + 1, 6:9] = -xp * x

    _, s, vt = np.linalg.svd(a)
    if s[-2] <= 1e-10 * s[0]:
        for name, pts in (("image", img), ("world", wld)):
            bad = _collinear_triple(pts)
            if bad is not None:
                raise ValueError(
                    f"degenerate calibration: {name} points {bad[0]}, {bad[1]}, "
                    f"{bad[2]} are collinear"
                )
        raise ValueError("degenerate calibration: correspondences do not span the plane")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_wld) @ hn @ t_img
    h /= np.linalg.norm(h)
    flat = h.reshape(-1)
    if flat[np.argmax(np.abs(flat))] < 0:
        h = -h

    hom = Homography(h)
    proj, _ = project_points(img, hom)
    hom.rms = float(np.sqrt(np.mean(np.sum((proj - wld) ** 2, axis=1))))
    return hom


def load_correspondences(path):
    """Read `u v X Y` lines; returns (image (N,2), world (N,2))."""
    img, wld = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected `u v X Y`, got {line!r}")
        try:
            u, v, x, y = (float(p) for p in parts)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value in {line!r}") from None
        img.append((u, v))
        wld.append((x, y))
    if len(img) < 4:
        raise ValueError(f"{path}: need at least 4 correspondences, found {len(img)}")
    return np.array(img), np.array(wld)


def save_correspondences(path, image_points, world_points):
    lines = ["# u v X Y"]
    for (u, v), (x, y) in zip(image_points, world_points):
        lines.append(f"{u:.6f} {v:.6f} {x:.6f} {y:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
