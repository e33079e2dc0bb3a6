"""Detection evaluation: greedy IoU matching, FPPI sweep, log-average miss rate."""

from dataclasses import dataclass, field

import numpy as np

from ..boxes import iou

LAMR_FPPI_POINTS = np.logspace(-2, 0, 9)


@dataclass
class DetectionMetrics:
    recall: float
    precision: float
    fp_per_frame: float
    lamr: float
    n_ground_truth: int
    n_detections: int
    curve: list = field(default_factory=list)  # (threshold, fppi, miss_rate)


def match_frame(detections, ground_truth, iou_threshold=0.5):
    """Greedy matching, highest confidence first.

    Each detection takes the unmatched ground-truth box it overlaps most,
    provided IoU >= threshold. Returns a boolean true-positive flag per
    detection (in the sorted order) together with that order's indices.
    """
    order = sorted(
        range(len(detections)),
        key=lambda i: (-detections[i].confidence, detections[i].box.x, detections[i].box.y),
    )
    taken = [False] * len(ground_truth)
    tp = np.zeros(len(detections), dtype=bool)
    for rank, i in enumerate(order):
        best, best_iou = -1, iou_threshold
        for g, gt in enumerate(ground_truth):
            if taken[g]:
                continue
            v = iou(detections[i].box, gt)
            if v >= best_iou:
                best, best_iou = g, v
        if best >= 0:
            taken[best] = True
            tp[rank] = True
    return tp, order


def evaluate_detections(records, iou_threshold=0.5):
    """Metrics over FrameRecords carrying ground truth.

    The operating point uses every recorded detection; the FPPI/miss-rate
    curve sweeps the detection confidence (the network probability for
    refined detections). Matching is computed once per frame and each
    detection's true-positive label is reused across thresholds.
    """
    n_frames = len(records)
    if n_frames == 0:
        raise ValueError("no frames to evaluate")
    confidences, tp_flags = [], []
    n_gt = 0
    for rec in records:
        n_gt += len(rec.ground_truth)
        tp, order = match_frame(rec.detections, rec.ground_truth, iou_threshold)
        for rank, i in enumerate(order):
            confidences.append(rec.detections[i].confidence)
            tp_flags.append(tp[rank])
    confidences = np.asarray(confidences)
    tp_flags = np.asarray(tp_flags, dtype=bool)
    n_det = len(confidences)

    n_tp = int(tp_flags.sum())
    recall = n_tp / n_gt if n_gt else 0.0
    precision = n_tp / n_det if n_det else 0.0
    fp_per_frame = (n_det - n_tp) / n_frames

    # sweep thresholds from strictest to loosest
    curve = []
    if n_det:
        desc = np.argsort(-confidences, kind="stable")
        conf_sorted = confidences[desc]
        tp_sorted = tp_flags[desc]
        cum_tp = np.cumsum(tp_sorted)
        cum_fp = np.cumsum(~tp_sorted)
        boundaries = np.flatnonzero(np.diff(conf_sorted)) if n_det > 1 else np.array([], int)
        cut_points = np.append(boundaries, n_det - 1)
        for c in cut_points:
            thr = conf_sorted[c]
            fppi = cum_fp[c] / n_frames
            miss = 1.0 - (cum_tp[c] / n_gt if n_gt else 0.0)
            curve.append((float(thr), float(fppi), float(miss)))

    lamr = log_average_miss_rate(curve)
    return DetectionMetrics(recall, precision, fp_per_frame, lamr, n_gt, n_det, curve)


def log_average_miss_rate(curve, fppi_points=LAMR_FPPI_POINTS):
    """Geometric mean of the miss rate sampled at reference FPPI values.

    For each reference point the miss rate of the loosest operating point
    with FPPI <= reference is used; references below the sparsest
    operating point count a miss rate of 1.
    """
    rates = []
    for ref in fppi_points:
        best = 1.0
        for _, fppi, miss in curve:
            if fppi <= ref:
                best = min(best, miss)
        rates.append(max(best, 1e-10))
    return float(np.exp(np.mean(np.log(rates))))


def format_metrics(m):
    return (
        f"ground truth boxes : {m.n_ground_truth}\n"
        f"detections         : {m.n_detections}\n"
        f"recall             : {m.recall:.4f}\n"
        f"precision          : {m.precision:.4f}\n"
        f"false pos / frame  : {m.fp_per_frame:.4f}\n"
        f"log-avg miss rate  : {m.lamr:.4f}\n"
    )
