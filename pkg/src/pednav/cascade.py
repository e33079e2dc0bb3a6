"""Two-stage detector: channel-feature proposals refined by the network.

A frame flows through pyramid -> proposal detector -> NMS -> score
threshold -> crop/resize -> network classification. Surviving detections
keep their original proposal score untouched; the network contributes
only the keep/drop decision plus its probability (stored separately for
threshold sweeps in evaluation).

The training-set builder mirrors the detector's deployment conditions:
positives are ground-truth crops (flip-doubled, then deformation-doubled),
negatives are the proposal detector's own detections on pedestrian-free
images.

Detections text format: one line per detection, `frameId x y w h score`.
"""

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .acf.detect import detect, nms
from .boxes import BoundingBox
from .cnn.train import positive_probability
from .imgio import resize_bilinear
from .pyramid import build_pyramid

log = logging.getLogger(__name__)

CROP_SIDE = 64


@dataclass
class CascadeConfig:
    stride: int = 1
    nms_overlap: float = 0.5
    cnn_threshold: float = 0.5
    score_threshold: float = float("-inf")
    shrink: int = 4
    scales_per_octave: int = 8
    smooth: bool = True


@dataclass
class StageTiming:
    acf_time: float
    cnn_time: float
    total_time: float
    fps: float
    cnn_calls: int = 0


@dataclass
class Detection:
    box: BoundingBox
    score: float  # proposal score, never rescored
    source: str  # "acf" or "acf+cnn"
    cnn_prob: float = float("nan")

    @property
    def confidence(self):
        """Sweepable confidence: network probability when it ran."""
        return self.cnn_prob if self.source == "acf+cnn" else self.score


def crop_box(img, box, side=CROP_SIDE):
    """Clipped integer crop of a box, resized to side x side."""
    h, w = img.shape[:2]
    clipped = box.clip(w, h)
    x0, y0 = int(np.floor(clipped.x)), int(np.floor(clipped.y))
    x1, y1 = int(np.ceil(clipped.x2)), int(np.ceil(clipped.y2))
    x1, y1 = min(max(x1, x0 + 1), w), min(max(y1, y0 + 1), h)
    return resize_bilinear(img[y0:y1, x0:x1], side, side)


def detect_pedestrians(img, acf_model, cnn_model, config=None):
    """Run the full detector on one frame.

    cnn_model may be None for the proposal-only mode (detections tagged
    "acf"). config.score_threshold = -inf is the baseline mode in which
    every post-NMS proposal reaches the network.
    """
    cfg = config or CascadeConfig()
    if acf_model is None:
        raise ValueError("proposal detector model is required")
    t_start = time.perf_counter()

    pyr = build_pyramid(
        img,
        acf_model.window,
        shrink=cfg.shrink,
        scales_per_octave=cfg.scales_per_octave,
        smooth=cfg.smooth,
    )
    proposals = nms(detect(pyr, acf_model, stride=cfg.stride), cfg.nms_overlap)
    proposals = [p for p in proposals if p.score >= cfg.score_threshold]
    proposals.sort(key=lambda p: (-p.score, p.box.x, p.box.y))
    t_acf = time.perf_counter()

    detections = []
    cnn_calls = 0
    if cnn_model is None:
        detections = [Detection(p.box, p.score, "acf") for p in proposals]
    elif proposals:
        crops = np.stack([crop_box(img, p.box) for p in proposals])
        probs = positive_probability(cnn_model, crops)
        cnn_calls = len(proposals)
        for p, prob in zip(proposals, probs):
            if prob >= cfg.cnn_threshold:
                detections.append(Detection(p.box, p.score, "acf+cnn", float(prob)))
    t_end = time.perf_counter()

    total = max(t_end - t_start, 1e-9)
    timing = StageTiming(
        acf_time=t_acf - t_start,
        cnn_time=t_end - t_acf,
        total_time=total,
        fps=1.0 / total,
        cnn_calls=cnn_calls,
    )
    return detections, timing


def calibrate_score_threshold(true_positive_scores, retain=0.99):
    """Score threshold keeping the given fraction of true-positive proposals.

    The threshold is the (1 - retain) quantile of matched-proposal scores,
    so raising `retain` lowers the threshold.
    """
    scores = np.asarray(true_positive_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("no true-positive scores to calibrate from")
    if not 0 < retain <= 1:
        raise ValueError("retain must lie in (0, 1]")
    return float(np.quantile(scores, 1.0 - retain))


# ---------------------------------------------------------------- training set


@dataclass
class AugmentConfig:
    flip: bool = True
    deform_lo: int = 0
    deform_hi: int = 5
    seed: int = 0


@dataclass
class DatasetSpec:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    train_fraction: float = 0.9

    def save(self, path):
        np.savez_compressed(
            path,
            x_train=self.x_train,
            y_train=self.y_train,
            x_val=self.x_val,
            y_val=self.y_val,
            train_fraction=self.train_fraction,
        )

    @classmethod
    def load(cls, path):
        d = np.load(path)
        return cls(
            d["x_train"],
            d["y_train"],
            d["x_val"],
            d["y_val"],
            float(d["train_fraction"]),
        )


def random_deform(crop, lo, hi, rng):
    """Crop margins drawn uniformly from [lo, hi] pixels per side, resize back.

    The four margins (top, bottom, left, right) are sampled independently;
    [0, 0] reproduces the input exactly.
    """
    h, w = crop.shape[:2]
    if lo < 0 or hi < lo:
        raise ValueError(f"bad deformation range [{lo}, {hi}]")
    if 2 * hi >= min(h, w):
        raise ValueError(f"deformation range {hi} too large for a {h}x{w} crop")
    top, bottom, left, right = (int(m) for m in rng.integers(lo, hi + 1, size=4))
    sub = crop[top : h - bottom, left : w - right]
    return resize_bilinear(sub, h, w)


def augment_positives(crops, aug):
    """Flip-double then deform-double: N -> 2N -> 4N crops."""
    rng = np.random.default_rng(aug.seed)
    stage1 = list(crops)
    if aug.flip:
        stage1 = stage1 + [c[:, ::-1].copy() for c in crops]
    stage2 = stage1 + [random_deform(c, aug.deform_lo, aug.deform_hi, rng) for c in stage1]
    return stage2


def split_counts(n, fraction):
    """Training-set size for one class: ceil(fraction * n).

    The split is stratified, so the total training count is the sum of the
    per-class ceilings.
    """
    return int(np.ceil(fraction * n))


def stratified_split(x, y, fraction, rng):
    """Shuffled per-class split; each class contributes ceil(fraction * n)."""
    train_idx, val_idx = [], []
    for cls in np.unique(y):
        rows = np.flatnonzero(y == cls)
        rows = rows[rng.permutation(len(rows))]
        k = split_counts(len(rows), fraction)
        train_idx.append(rows[:k])
        val_idx.append(rows[k:])
    train_idx = np.concatenate(train_idx)
    val_idx = np.concatenate(val_idx)
    train_idx = train_idx[rng.permutation(len(train_idx))]
    val_idx = val_idx[rng.permutation(len(val_idx))]
    return x[train_idx], y[train_idx], x[val_idx], y[val_idx]


def mine_negative_crops(images, miner, cfg=None, per_image=50, limit=20000):
    """Miner detections on pedestrian-free images, cropped for the network.

    Both cascade bars are dropped so ranking decides: even when the
    proposal stage is clean on these images, the network still trains on
    the most person-like background windows it would score highest.
    """
    cfg = cfg or CascadeConfig()
    weak = replace(
        miner, accept_threshold=float("-inf"), reject_threshold=float("-inf")
    )
    pool = max(200, 20 * per_image)  # suppression candidates per image, caps the n^2 NMS
    crops = []
    for img in images:
        pyr = build_pyramid(
            img,
            weak.window,
            shrink=cfg.shrink,
            scales_per_octave=cfg.scales_per_octave,
            smooth=cfg.smooth,
        )
        props = detect(pyr, weak, stride=cfg.stride)
        props.sort(key=lambda p: (-p.score, p.box.x, p.box.y))
        props = nms(props[:pool], cfg.nms_overlap)
        props.sort(key=lambda p: (-p.score, p.box.x, p.box.y))
        for p in props[:per_image]:
            crops.append(crop_box(img, p.box))
            if len(crops) >= limit:
                return crops
    return crops


def build_training_set(
    positives,
    negative_images,
    aug=None,
    miner=None,
    train_fraction=0.9,
    seed=0,
    negatives_per_image=50,
    max_negatives=20000,
):
    """Assemble the refinement dataset.

    positives: list of (image, ground-truth boxes) pairs. negative_images:
    pedestrian-free frames mined with the proposal detector. Labels are
    1 = pedestrian, 0 = background; the 90/10 split is stratified per
    class with per-class ceiling, shuffled by seed.
    """
    aug = aug or AugmentConfig(seed=seed)
    if miner is None:
        raise ValueError("a proposal-detector miner is required to build negatives")
    pos_crops = []
    for img, boxes in positives:
        for box in boxes:
            pos_crops.append(crop_box(img, box))
    if not pos_crops:
        raise ValueError("no positive boxes in the training images")
    pos_crops = augment_positives(pos_crops, aug)

    neg_crops = mine_negative_crops(
        negative_images, miner, per_image=negatives_per_image, limit=max_negatives
    )
    if not neg_crops:
        raise ValueError(
            "the miner produced no negatives; weaken it (lower its acceptance "
            "threshold) or supply more negative images"
        )

    x = np.stack(pos_crops + neg_crops)
    y = np.concatenate(
        [np.ones(len(pos_crops), dtype=np.int64), np.zeros(len(neg_crops), dtype=np.int64)]
    )
    rng = np.random.default_rng(seed)
    xt, yt, xv, yv = stratified_split(x, y, train_fraction, rng)
    log.info(
        "dataset: %d positives (augmented), %d negatives -> %d train / %d val",
        len(pos_crops),
        len(neg_crops),
        len(yt),
        len(yv),
    )
    return DatasetSpec(xt, yt, xv, yv, train_fraction)


# ---------------------------------------------------------------------- text io


def write_detections(path, rows):
    """rows: iterable of (frame_id, Detection)."""
    lines = ["# frameId x y w h score"]
    for frame, det in rows:
        b = det.box
        lines.append(f"{frame} {b.x:.3f} {b.y:.3f} {b.w:.3f} {b.h:.3f} {det.score:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_detections(path):
    """Returns list of (frame_id, Detection) with source "acf" (the text
    format carries only the proposal score)."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        frame = int(parts[0])
        x, y, w, h, score = (float(p) for p in parts[1:])
        rows.append((frame, Detection(BoundingBox(x, y, w, h), score, "acf")))
    return rows
