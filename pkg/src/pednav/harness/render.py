"""Deterministic synthetic frames: textured floor, clutter, pedestrians.

People are placed through the scenario's ground homography: the sprite's
foot pixel is the projection of the scripted world position, and the
sprite height comes from the local pixels-per-meter scale of the
homography at that point, so apparent size shrinks with distance. The
ground-truth box is the square sprite region (side = pixel height) whose
bottom-center is exactly the foot pixel; people whose box leaves the
frame are neither drawn nor annotated.

Every frame is a pure function of (script seed, frame index).
"""

import numpy as np

from ..boxes import BoundingBox
from ..imgio import resize_bilinear

PERSON_HEIGHT_M = 1.7
MIN_SPRITE_PX = 16


def _pixels_per_meter(hom, u, v):
    """Local isotropic scale of the image at (u, v) under image->world H."""
    w = hom.h[2, 0] * u + hom.h[2, 1] * v + hom.h[2, 2]
    det = abs(np.linalg.det(hom.h))
    return float(np.sqrt(abs(w) ** 3 / det))


def world_to_image(hom, point):
    """Inverse projection, world meters -> pixel coordinates."""
    vec = np.linalg.inv(hom.h) @ np.array([point[0], point[1], 1.0])
    return np.array([vec[0] / vec[2], vec[1] / vec[2]])


def person_box(script, world_pos, person_height=PERSON_HEIGHT_M):
    """Square ground-truth box for a person standing at a world point.

    Returns None when the box is not fully inside the image or the sprite
    would be degenerate (too small / bigger than the frame).
    """
    w, h = script.image_size
    u, v = world_to_image(script.homography, world_pos)
    side = person_height * _pixels_per_meter(script.homography, u, v)
    if side < MIN_SPRITE_PX or side > h:
        return None
    box = BoundingBox(u - side / 2.0, v - side, side, side)
    if box.x < 0 or box.y < 0 or box.x2 > w or box.y2 > h:
        return None
    return box


def _sprite_mask(side_px, phase):
    """Pedestrian silhouette mask plus a head mask, both (side, side)."""
    ys, xs = np.mgrid[0:side_px, 0:side_px]
    ny = (ys + 0.5) / side_px
    nx = (xs + 0.5) / side_px
    swing = 0.09 * np.sin(phase)

    head = (nx - 0.5) ** 2 / 0.09**2 + (ny - 0.12) ** 2 / 0.11**2 <= 1.0
    torso = (np.abs(nx - 0.5) <= 0.14) & (ny >= 0.2) & (ny <= 0.58)
    arm_l = (np.abs(nx - (0.32 + 0.5 * swing)) <= 0.045) & (ny >= 0.24) & (ny <= 0.52)
    arm_r = (np.abs(nx - (0.68 - 0.5 * swing)) <= 0.045) & (ny >= 0.24) & (ny <= 0.52)
    leg_span = (ny - 0.58) / 0.42  # 0 at hip, 1 at feet
    leg_l = (np.abs(nx - (0.44 + swing * leg_span)) <= 0.055) & (ny > 0.58) & (ny <= 0.97)
    leg_r = (np.abs(nx - (0.56 - swing * leg_span)) <= 0.055) & (ny > 0.58) & (ny <= 0.97)
    body = torso | arm_l | arm_r | leg_l | leg_r
    return body, head


def _draw_person(img, box, sprite_id, phase, rng):
    h, w = img.shape[:2]
    x0, y0 = int(np.floor(box.x)), int(np.floor(box.y))
    x1, y1 = int(np.ceil(box.x2)), int(np.ceil(box.y2))
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, w), min(y1, h)
    side = max(x1 - x0, y1 - y0)
    if side < 4:
        return
    crng = np.random.default_rng([sprite_id, 77])
    clothes = crng.uniform(0.05, 0.35, size=3)
    skin = np.array([0.85, 0.72, 0.6]) * crng.uniform(0.85, 1.1)
    body, head = _sprite_mask(side, phase)
    body = body[: y1 - y0, : x1 - x0]
    head = head[: y1 - y0, : x1 - x0]
    patch = img[y0:y1, x0:x1]
    noise = rng.normal(0.0, 0.02, size=patch.shape)
    patch[body] = np.clip(clothes + noise[body], 0, 1)
    patch[head] = np.clip(skin + noise[head], 0, 1)


def _floor(script, height, width):
    rng = np.random.default_rng([script.seed, 11])
    coarse = rng.uniform(0.5, 0.8, size=(8, 10))
    base = resize_bilinear(coarse, height, width)
    shade = np.linspace(0.82, 1.0, height)[:, None]
    tint = np.array([1.0, 0.98, 0.94])
    return np.clip(base[:, :, None] * shade[:, :, None] * tint, 0, 1)


def _clutter(img, script):
    """Static high-contrast distractors, fixed for the whole scenario."""
    rng = np.random.default_rng([script.seed, 23])
    h, w = img.shape[:2]
    for _ in range(7):
        kind = rng.integers(3)
        cw = int(rng.uniform(0.03, 0.10) * w)
        ch = int(rng.uniform(0.05, 0.22) * h)
        cx = int(rng.uniform(0.05, 0.95) * w)
        cy = int(rng.uniform(0.35, 0.92) * h)
        color = rng.uniform(0.0, 1.0, size=3)
        x0, x1 = max(cx - cw // 2, 0), min(cx + cw // 2 + 1, w)
        y0, y1 = max(cy - ch // 2, 0), min(cy + ch // 2 + 1, h)
        if x1 <= x0 or y1 <= y0:
            continue
        if kind == 0:
            img[y0:y1, x0:x1] = color
        elif kind == 1:
            ys, xs = np.mgrid[y0:y1, x0:x1]
            mask = ((xs - cx) / max(cw / 2, 1)) ** 2 + ((ys - cy) / max(ch / 2, 1)) ** 2 <= 1
            img[y0:y1, x0:x1][mask] = color
        else:
            t = max(1, min(3, (x1 - x0) // 3))
            img[y0:y1, x0 : x0 + t] = color
            img[y0:y1, x1 - t : x1] = color
            img[y0 : y0 + t, x0:x1] = color


def render_frame(script, frame_idx, include_people=True):
    """Returns (image (H, W, 3) float64 in [0, 1], ground-truth boxes)."""
    if not 0 <= frame_idx < script.duration:
        raise ValueError(f"frame {frame_idx} outside scenario duration {script.duration}")
    width, height = script.image_size
    img = _floor(script, height, width)
    _clutter(img, script)

    boxes = []
    if include_people:
        t = frame_idx * script.dt
        drawable = []
        for person in script.people:
            pos = person.position(t)
            box = person_box(script, pos)
            if box is None:
                continue
            speed = float(np.linalg.norm(person.velocity(t)))
            phase = 2 * np.pi * (t * max(speed, 0.0) / 0.7) if speed > 0.05 else 0.0
            drawable.append((box, person.sprite_id, phase))
        drawable.sort(key=lambda d: d[0].y2)  # far to near
        rng = np.random.default_rng([script.seed, 31, frame_idx])
        for box, sprite_id, phase in drawable:
            _draw_person(img, box, sprite_id, phase, rng)
        boxes = [d[0] for d in drawable]

    rng_noise = np.random.default_rng([script.seed, 47, frame_idx])
    img = np.clip(img + rng_noise.normal(0.0, 0.01, size=img.shape), 0.0, 1.0)
    return img, boxes
