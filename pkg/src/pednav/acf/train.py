"""Discrete AdaBoost over depth-2 trees on aggregated channel features.

Training runs in bootstrapping stages: each stage fits a fresh ensemble on
the current positive/negative pools, then mines hard false positives from
the negative source images to refill the negative pool for the next stage.

Features are quantized to 256 bins per feature for the weighted stump
search; the dequantized thresholds stored in the model reproduce the exact
quantized decisions (x < lo + (b + 1) * step  iff  code(x) <= b).
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..boxes import BoundingBox
from ..channels import N_CHANNELS, compute_channels
from ..imgio import resize_bilinear
from ..pyramid import build_pyramid
from .detect import detect, nms
from .model import TreeEnsemble

log = logging.getLogger(__name__)

N_BINS = 256


@dataclass
class BoostConfig:
    window: tuple = (64, 64)
    shrink: int = 4
    tree_counts: tuple = (32, 128, 512, 2048)
    seed: int = 0
    feature_fraction: float = 0.125  # features sampled per boosting round
    alpha_max: float = 10.0  # cap for the vote weight when a round separates perfectly
    initial_negatives: int = 2000
    max_negatives: int = 5000
    mine_per_image: int = 25
    mine_nms_overlap: float = 0.5
    detect_stride: int = 1
    reject_margin: float = 1.0
    accept_margin: float = 0.5
    smooth: bool = True


@dataclass
class _Stump:
    feature: int
    bin: int
    polarity: int  # +1: left leaf predicts positive

    def leaf_signs(self):
        return (self.polarity, -self.polarity)


def crop_features(crops, cfg):
    """Channel feature vectors for window-sized crops, shape (N, F)."""
    rows = []
    for crop in crops:
        stack = compute_channels(crop, cfg.shrink, smooth=cfg.smooth)
        rows.append(stack.data.reshape(-1))
    return np.asarray(rows)


def quantize(x):
    """Per-feature uniform 256-bin codes plus the dequantization table."""
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    step = (hi - lo) / N_BINS
    step[step <= 0] = 1.0
    codes = np.clip(np.floor((x - lo) / step), 0, N_BINS - 1).astype(np.uint8)
    return codes, lo, step


def _stump_search(codes_sub, wpos, wneg, cols):
    """Best weighted stump over the candidate feature columns.

    codes_sub: (n, Fs) uint8 codes restricted to the node's samples
    wpos/wneg: per-sample weights, zero where the label does not match
    Returns (error, _Stump) with a deterministic tie-break on the scan order.
    """
    n, fs = codes_sub.shape
    offsets = (np.arange(fs, dtype=np.int64) * N_BINS)[None, :]
    comb = codes_sub.astype(np.int64) + offsets
    flat = comb.ravel()
    hp = np.bincount(flat, weights=np.repeat(wpos, fs), minlength=fs * N_BINS)
    hn = np.bincount(flat, weights=np.repeat(wneg, fs), minlength=fs * N_BINS)
    cp = hp.reshape(fs, N_BINS).cumsum(axis=1)
    cn = hn.reshape(fs, N_BINS).cumsum(axis=1)
    tot_p = wpos.sum()
    tot_n = wneg.sum()

    # polarity +1: x < thr predicts positive
    err_pos = (tot_p - cp) + cn
    err_neg = cp + (tot_n - cn)
    best_pos = int(np.argmin(err_pos))
    best_neg = int(np.argmin(err_neg))
    if err_pos.ravel()[best_pos] <= err_neg.ravel()[best_neg]:
        f, b = divmod(best_pos, N_BINS)
        return float(err_pos.ravel()[best_pos]), _Stump(int(cols[f]), b, +1)
    f, b = divmod(best_neg, N_BINS)
    return float(err_neg.ravel()[best_neg]), _Stump(int(cols[f]), b, -1)


def _fit_depth2(codes, labels, weights, cols):
    """Greedy depth-2 tree: root stump, then one stump per branch.

    Returns ((features, bins, leaf_signs), predictions) with discrete leaf
    signs in {-1, +1}. Empty branches inherit the root polarity for their
    side so the tree's prediction stays defined everywhere.
    """
    pos_w = np.where(labels > 0, weights, 0.0)
    neg_w = np.where(labels > 0, 0.0, weights)
    sub = codes[:, cols]
    _, root = _stump_search(sub, pos_w, neg_w, cols)

    go_left = codes[:, root.feature] <= root.bin
    feats = [root.feature, root.feature, root.feature]
    bins = [root.bin, root.bin, root.bin]
    signs = [root.polarity, root.polarity, -root.polarity, -root.polarity]

    for side, mask in ((0, go_left), (1, ~go_left)):
        rows = np.flatnonzero(mask)
        default = root.polarity if side == 0 else -root.polarity
        if rows.size == 0:
            continue
        _, stump = _stump_search(sub[rows], pos_w[rows], neg_w[rows], cols)
        child_left = codes[rows, stump.feature] <= stump.bin
        lsign, rsign = stump.leaf_signs()
        # tie between leaves and a pure node both appear as zero-error stumps;
        # empty leaves fall back to the parent side's default
        if not child_left.any():
            lsign = default
        if child_left.all():
            rsign = default
        feats[1 + side] = stump.feature
        bins[1 + side] = stump.bin
        if side == 0:
            signs[0], signs[1] = lsign, rsign
        else:
            signs[2], signs[3] = lsign, rsign

    pred = np.empty(len(labels), dtype=np.int64)
    left_rows = go_left
    ll = codes[:, feats[1]] <= bins[1]
    rl = codes[:, feats[2]] <= bins[2]
    pred[left_rows & ll] = signs[0]
    pred[left_rows & ~ll] = signs[1]
    pred[~left_rows & rl] = signs[2]
    pred[~left_rows & ~rl] = signs[3]
    return (feats, bins, signs), pred


def boost(codes, labels, weights_out, n_trees, cfg, rng, lo, step):
    """Fit n_trees depth-2 trees with discrete AdaBoost.

    weights_out, when not None, collects the per-round normalized weight
    vector (diagnostics and invariant checks).
    """
    n, n_feat = codes.shape
    w = np.full(n, 1.0 / n)
    feats = np.empty((n_trees, 3), dtype=np.int64)
    ths = np.empty((n_trees, 3))
    lvs = np.empty((n_trees, 4))
    n_cols = max(1, int(round(cfg.feature_fraction * n_feat)))

    for t in range(n_trees):
        if n_cols >= n_feat:
            cols = np.arange(n_feat)
        else:
            cols = np.sort(rng.choice(n_feat, size=n_cols, replace=False))
        (tf, tb, signs), pred = _fit_depth2(codes, labels, w, cols)

        err = float(w[pred != labels].sum())
        err = min(max(err, 1e-12), 1.0 - 1e-12)
        alpha = min(0.5 * np.log((1.0 - err) / err), cfg.alpha_max)

        feats[t] = tf
        # top bin catches the per-feature max exactly, so nudge past it
        ths[t] = [
            np.nextafter(lo[f] + N_BINS * step[f], np.inf)
            if b == N_BINS - 1
            else lo[f] + (b + 1) * step[f]
            for f, b in zip(tf, tb)
        ]
        lvs[t] = [alpha * s for s in signs]

        w = w * np.exp(-alpha * labels * pred)
        w /= w.sum()
        if weights_out is not None:
            weights_out.append(w.copy())
    return feats, ths, lvs


def _calibrate(features_pos, model, cfg):
    """Reject and acceptance thresholds from positive-sample score traces.

    Both bars are the positive-trace minimum less a safety margin, so no
    training positive is ever cascade-rejected or refused. Each is also
    capped at the natural vote boundary 0: on an easily separated set the
    minima sit at the score ceiling, and uncapped bars would reject any
    test window that disagrees with even one tree.
    """
    contrib = apply_trees(features_pos, model)
    running = contrib.cumsum(axis=1)
    model.reject_threshold = min(0.0, float(running.min()) - cfg.reject_margin)
    model.accept_threshold = min(0.0, float(running[:, -1].min()) - cfg.accept_margin)
    return model


def apply_trees(x, model):
    """Per-tree contributions for feature rows, shape (N, T)."""
    f = model.features
    th = model.thresholds
    lv = model.leaves
    left = x[:, f[:, 0]] < th[None, :, 0]
    ll = x[:, f[:, 1]] < th[None, :, 1]
    rl = x[:, f[:, 2]] < th[None, :, 2]
    return np.where(
        left,
        np.where(ll, lv[None, :, 0], lv[None, :, 1]),
        np.where(rl, lv[None, :, 2], lv[None, :, 3]),
    )


def _sample_negative_crops(images, count, window, rng):
    win_w, win_h = window
    crops = []
    usable = [im for im in images if im.shape[0] >= win_h and im.shape[1] >= win_w]
    if not usable:
        raise ValueError("no negative source image fits the detector window")
    for k in range(count):
        im = usable[int(rng.integers(len(usable)))]
        h, w = im.shape[:2]
        max_s = min(w / win_w, h / win_h)
        s = float(rng.uniform(1.0, max(1.0, max_s)))
        cw, ch = int(round(win_w * s)), int(round(win_h * s))
        cw, ch = min(cw, w), min(ch, h)
        x = int(rng.integers(0, w - cw + 1))
        y = int(rng.integers(0, h - ch + 1))
        crop = im[y : y + ch, x : x + cw]
        if (ch, cw) != (win_h, win_w):
            crop = resize_bilinear(crop, win_h, win_w)
        crops.append(crop)
    return crops


def mine_hard_negatives(images, model, cfg, limit):
    """Top-scoring windows of the current ensemble on pedestrian-free images.

    Runs with both cascade bars dropped: when the partial ensemble already
    separates its training set there are no false positives to harvest,
    yet the highest-scoring background windows are exactly the negatives
    the next round needs to stop the trees from saturating.
    """
    weak = replace(model, accept_threshold=float("-inf"), reject_threshold=float("-inf"))
    pool = max(200, 20 * cfg.mine_per_image)  # caps the n^2 suppression pass
    crops = []
    for im in images:
        pyr = build_pyramid(im, weak.window, shrink=cfg.shrink, smooth=cfg.smooth)
        props = detect(pyr, weak, stride=cfg.detect_stride)
        props.sort(key=lambda p: (-p.score, p.box.x, p.box.y))
        props = nms(props[:pool], cfg.mine_nms_overlap)
        props.sort(key=lambda p: (-p.score, p.box.x, p.box.y))
        h, w = im.shape[:2]
        for p in props[: cfg.mine_per_image]:
            box = p.box.clip(w, h)
            if box.w < 8 or box.h < 8:
                continue
            crop = im[int(box.y) : int(box.y2), int(box.x) : int(box.x2)]
            crops.append(resize_bilinear(crop, model.window[1], model.window[0]))
            if len(crops) >= limit:
                return crops
    return crops


def train_acf(positives, negative_images, cfg=None):
    """Train the boosted detector with hard-negative bootstrapping.

    positives: window-sized RGB crops. negative_images: pedestrian-free
    images to sample and mine negatives from. Deterministic per cfg.seed.
    """
    cfg = cfg or BoostConfig()
    if not positives:
        raise ValueError("no positive crops")
    if not negative_images:
        raise ValueError("no negative source images")
    win_w, win_h = cfg.window
    for p in positives:
        if p.shape[:2] != (win_h, win_w):
            raise ValueError(f"positive crop is {p.shape[:2]}, window wants {(win_h, win_w)}")

    rng = np.random.default_rng(cfg.seed)
    pos_feat = crop_features(positives, cfg)
    neg_crops = _sample_negative_crops(negative_images, cfg.initial_negatives, cfg.window, rng)
    neg_feat = crop_features(neg_crops, cfg)

    model = None
    for stage, n_trees in enumerate(cfg.tree_counts):
        x = np.vstack([pos_feat, neg_feat])
        labels = np.concatenate(
            [np.ones(len(pos_feat), dtype=np.int64), -np.ones(len(neg_feat), dtype=np.int64)]
        )
        codes, lo, step = quantize(x)
        feats, ths, lvs = boost(codes, labels, None, n_trees, cfg, rng, lo, step)
        model = TreeEnsemble(
            features=feats,
            thresholds=ths,
            leaves=lvs,
            window=cfg.window,
            shrink=cfg.shrink,
            n_channels=N_CHANNELS,
        )
        model = _calibrate(pos_feat, model, cfg)
        log.info(
            "stage %d: %d trees, %d positives, %d negatives",
            stage,
            n_trees,
            len(pos_feat),
            len(neg_feat),
        )

        if stage + 1 < len(cfg.tree_counts):
            room = cfg.max_negatives - len(neg_feat)
            if room > 0:
                hard = mine_hard_negatives(negative_images, model, cfg, room)
                if hard:
                    neg_feat = np.vstack([neg_feat, crop_features(hard, cfg)])
                    log.info("stage %d mined %d hard negatives", stage, len(hard))
    return model
