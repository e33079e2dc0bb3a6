"""Two-stage detector plumbing: crops, augmentation, splits, text formats."""

import numpy as np
import pytest

from pednav.acf import TreeEnsemble
from pednav.boxes import BoundingBox
from pednav.cascade import (
    AugmentConfig,
    CascadeConfig,
    DatasetSpec,
    Detection,
    augment_positives,
    build_training_set,
    calibrate_score_threshold,
    crop_box,
    detect_pedestrians,
    mine_negative_crops,
    random_deform,
    read_detections,
    split_counts,
    stratified_split,
    write_detections,
)
from pednav.cnn.model import CnnModel


def _random_ensemble(seed, trees=24, window=(16, 16), shrink=4):
    """Random but structurally valid proposal model; bars wide open."""
    rng = np.random.default_rng(seed)
    wc, hc = window[0] // shrink, window[1] // shrink
    n_feat = 10 * wc * hc
    return TreeEnsemble(
        features=rng.integers(0, n_feat, size=(trees, 3)),
        thresholds=rng.uniform(0.0, 8.0, size=(trees, 3)),
        leaves=rng.normal(size=(trees, 4)),
        window=window,
        shrink=shrink,
        n_channels=10,
        reject_threshold=float("-inf"),
        accept_threshold=float("-inf"),
    )


# ---------------------------------------------------------------- crop_box


def test_crop_box_slices_exact_pixels():
    rng = np.random.default_rng(0)
    img = rng.random((40, 40, 3))
    crop = crop_box(img, BoundingBox(8, 4, 16, 16), side=16)
    assert np.allclose(crop, img[4:20, 8:24])


def test_crop_box_resizes_to_requested_side():
    img = np.zeros((50, 50, 3))
    assert crop_box(img, BoundingBox(0, 0, 10, 30), side=64).shape == (64, 64, 3)


def test_crop_box_survives_out_of_frame_boxes():
    img = np.ones((30, 30, 3))
    crop = crop_box(img, BoundingBox(-10, 25, 20, 20), side=8)
    assert crop.shape == (8, 8, 3)
    assert np.isfinite(crop).all()


# ------------------------------------------------------------ augmentation


def test_augment_doubles_twice():
    rng = np.random.default_rng(1)
    crops = [rng.random((20, 20, 3)) for _ in range(5)]
    out = augment_positives(crops, AugmentConfig(seed=0))
    assert len(out) == 20
    # the first N are the originals, the second N their mirrors
    for i in range(5):
        assert np.array_equal(out[i], crops[i])
        assert np.array_equal(out[5 + i], crops[i][:, ::-1])


def test_augment_without_flip_only_deforms():
    rng = np.random.default_rng(2)
    crops = [rng.random((20, 20, 3)) for _ in range(3)]
    out = augment_positives(crops, AugmentConfig(flip=False, seed=0))
    assert len(out) == 6


def test_augment_zero_deformation_is_identity():
    rng = np.random.default_rng(3)
    crops = [rng.random((16, 16, 3)) for _ in range(2)]
    out = augment_positives(crops, AugmentConfig(deform_lo=0, deform_hi=0, seed=0))
    assert len(out) == 8
    for i in range(4):
        assert np.allclose(out[4 + i], out[i])


def test_random_deform_is_seeded_and_bounded():
    rng = np.random.default_rng(4)
    crop = rng.random((24, 24, 3))
    a = random_deform(crop, 1, 4, np.random.default_rng(9))
    b = random_deform(crop, 1, 4, np.random.default_rng(9))
    assert np.array_equal(a, b)
    assert a.shape == crop.shape


def test_random_deform_validates_range():
    crop = np.zeros((10, 10, 3))
    with pytest.raises(ValueError):
        random_deform(crop, -1, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        random_deform(crop, 0, 5, np.random.default_rng(0))  # 2*hi eats the crop


# ------------------------------------------------------------------ splits


def test_split_counts_uses_ceiling():
    assert split_counts(10, 0.9) == 9
    assert split_counts(7, 0.9) == 7  # ceil(6.3)
    assert split_counts(5, 0.5) == 3
    assert split_counts(0, 0.9) == 0


def test_stratified_split_sizes_and_content():
    rng = np.random.default_rng(5)
    x = np.arange(100, dtype=np.float64)[:, None]
    y = np.concatenate([np.ones(70, dtype=np.int64), np.zeros(30, dtype=np.int64)])
    xt, yt, xv, yv = stratified_split(x, y, 0.9, rng)
    assert (yt == 1).sum() == 63 and (yt == 0).sum() == 27
    assert (yv == 1).sum() == 7 and (yv == 0).sum() == 3
    # a partition: nothing lost, nothing duplicated
    assert sorted(np.concatenate([xt, xv]).ravel().tolist()) == list(range(100))


# ------------------------------------------------------------- calibration


def test_calibrate_threshold_quantile_semantics():
    scores = np.arange(1.0, 101.0)
    # keep everything: the bar drops to the minimum score
    assert calibrate_score_threshold(scores, retain=1.0) == 1.0
    t90 = calibrate_score_threshold(scores, retain=0.9)
    assert (scores >= t90).mean() >= 0.9
    # more retention, lower bar
    assert calibrate_score_threshold(scores, 0.99) <= t90


def test_calibrate_threshold_validates():
    with pytest.raises(ValueError):
        calibrate_score_threshold([])
    with pytest.raises(ValueError):
        calibrate_score_threshold([1.0], retain=0.0)


# ----------------------------------------------------------- detector flow


@pytest.fixture(scope="module")
def noise_frame():
    rng = np.random.default_rng(6)
    return rng.random((48, 64, 3))


def test_proposal_only_mode_tags_acf(noise_frame):
    model = _random_ensemble(0)
    dets, timing = detect_pedestrians(noise_frame, model, None, CascadeConfig(stride=2))
    assert dets
    assert all(d.source == "acf" for d in dets)
    assert timing.cnn_calls == 0
    assert timing.cnn_time <= timing.total_time


def test_score_threshold_is_monotone(noise_frame):
    from dataclasses import replace

    model = _random_ensemble(0)
    base_cfg = CascadeConfig(stride=2)
    base, _ = detect_pedestrians(noise_frame, model, None, base_cfg)
    cut = np.median([d.score for d in base])
    cfg = replace(base_cfg, score_threshold=float(cut))
    kept, _ = detect_pedestrians(noise_frame, model, None, cfg)
    base_keys = {(d.box.x, d.box.y, d.score) for d in base}
    assert 0 < len(kept) < len(base)
    for d in kept:
        assert d.score >= cut
        assert (d.box.x, d.box.y, d.score) in base_keys


def test_cnn_stage_filters_by_probability(noise_frame):
    model = _random_ensemble(0)
    net = CnnModel(n_classes=2, seed=0)  # untrained: probabilities near 0.5
    open_cfg = CascadeConfig(stride=2, cnn_threshold=0.0)
    dets, timing = detect_pedestrians(noise_frame, model, net, open_cfg)
    assert dets
    assert timing.cnn_calls == len(dets)
    assert all(d.source == "acf+cnn" and np.isfinite(d.cnn_prob) for d in dets)
    shut_cfg = CascadeConfig(stride=2, cnn_threshold=1.1)
    none, timing2 = detect_pedestrians(noise_frame, model, net, shut_cfg)
    assert none == []
    assert timing2.cnn_calls == timing.cnn_calls  # same proposals reach the net


def test_detection_confidence_prefers_network():
    d1 = Detection(BoundingBox(0, 0, 1, 1), 3.0, "acf")
    d2 = Detection(BoundingBox(0, 0, 1, 1), 3.0, "acf+cnn", 0.8)
    assert d1.confidence == 3.0
    assert d2.confidence == 0.8


def test_missing_proposal_model_raises(noise_frame):
    with pytest.raises(ValueError):
        detect_pedestrians(noise_frame, None, None)


# ------------------------------------------------------------ dataset build


def test_mine_negative_crops_yields_window_crops():
    rng = np.random.default_rng(7)
    images = [rng.random((40, 56, 3)) for _ in range(3)]
    miner = _random_ensemble(1)
    crops = mine_negative_crops(images, miner, per_image=4, limit=10)
    assert 0 < len(crops) <= 10
    # mined crops feed the network dataset, so they are network-input sized
    for c in crops:
        assert c.shape == (64, 64, 3)


def test_build_training_set_labels_and_split():
    rng = np.random.default_rng(8)
    frames = []
    for _ in range(2):
        img = rng.random((48, 64, 3)) * 0.3
        img[10:34, 20:32] += 0.6
        frames.append((np.clip(img, 0, 1), [BoundingBox(20, 10, 12, 24)]))
    backgrounds = [rng.random((40, 56, 3)) for _ in range(3)]
    spec = build_training_set(
        frames,
        backgrounds,
        aug=AugmentConfig(seed=0, deform_hi=3),
        miner=_random_ensemble(2),
        seed=0,
        negatives_per_image=5,
        max_negatives=12,
    )
    n_pos = (spec.y_train == 1).sum() + (spec.y_val == 1).sum()
    assert n_pos == 2 * 4  # two boxes, augmented fourfold
    assert (spec.y_train == 0).sum() + (spec.y_val == 0).sum() > 0
    assert spec.x_train.shape[1:] == (64, 64, 3)
    assert len(spec.x_train) == len(spec.y_train)
    assert len(spec.x_val) == len(spec.y_val)


def test_build_training_set_requires_miner():
    with pytest.raises(ValueError):
        build_training_set([(np.zeros((32, 32, 3)), [BoundingBox(0, 0, 8, 8)])], [], miner=None)


def test_dataset_file_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    spec = DatasetSpec(
        x_train=rng.random((6, 64, 64, 3)),
        y_train=np.array([0, 1, 0, 1, 1, 0]),
        x_val=rng.random((2, 64, 64, 3)),
        y_val=np.array([1, 0]),
        train_fraction=0.75,
    )
    path = tmp_path / "ds.npz"
    spec.save(path)
    back = DatasetSpec.load(path)
    assert np.array_equal(spec.x_train, back.x_train)
    assert np.array_equal(spec.y_train, back.y_train)
    assert np.array_equal(spec.x_val, back.x_val)
    assert np.array_equal(spec.y_val, back.y_val)
    assert back.train_fraction == 0.75


# ---------------------------------------------------------------- text io


def test_detections_text_round_trip(tmp_path):
    rows = [
        (0, Detection(BoundingBox(1.25, 2.5, 30.0, 60.0), 4.125, "acf")),
        (0, Detection(BoundingBox(100.0, 20.0, 25.0, 50.0), -0.5, "acf")),
        (3, Detection(BoundingBox(7.0, 8.0, 9.0, 10.0), 1.0, "acf+cnn", 0.9)),
    ]
    path = tmp_path / "dets.txt"
    write_detections(path, rows)
    back = read_detections(path)
    assert len(back) == 3
    for (f0, d0), (f1, d1) in zip(rows, back):
        assert f0 == f1
        assert d1.source == "acf"  # text format carries no network column
        assert (d1.box.x, d1.box.y, d1.box.w, d1.box.h) == pytest.approx(
            (d0.box.x, d0.box.y, d0.box.w, d0.box.h), abs=1e-3
        )
        assert d1.score == pytest.approx(d0.score, abs=1e-6)


def test_read_detections_rejects_short_rows(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# header\n0 1 2 3\n")
    with pytest.raises(ValueError):
        read_detections(path)
