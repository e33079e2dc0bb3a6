"""Layered run configuration: built-in defaults < YAML file < --set flags.

Every CLI verb reads the same nested structure; unknown keys anywhere are
rejected so typos fail loudly. Override syntax is dotted-path assignments
like `tracker.method=nnjpda` or `cascade.stride=2`; values are parsed as
YAML scalars (so `true`, `0.5`, `[32, 128]` all work).
"""

import copy
from pathlib import Path

import yaml

from .acf.train import BoostConfig
from .cascade import AugmentConfig, CascadeConfig
from .cnn.train import TrainConfig
from .harness.pipeline import PipelineSetup
from .planner import HanConfig, ReplanConfig
from .tracker import TrackerConfig

DEFAULTS = {
    "cascade": {
        "stride": 1,
        "nms_overlap": 0.5,
        "cnn_threshold": 0.5,
        "score_threshold": float("-inf"),
        "shrink": 4,
        "scales_per_octave": 8,
        "smooth": True,
    },
    "acf_train": {
        "window": 64,  # square detector window, px; proposals of any size reach the CNN via resize
        "tree_counts": [32, 128, 512, 2048],
        "seed": 0,
        "feature_fraction": 0.125,
        "alpha_max": 10.0,
        "initial_negatives": 2000,
        "max_negatives": 5000,
        "mine_per_image": 25,
        "detect_stride": 1,
        "reject_margin": 1.0,
        "accept_margin": 0.5,
    },
    "cnn_train": {
        "epochs": 10,
        "batch_size": 100,
        "lr": 0.001,
        "momentum": 0.9,
        "seed": 0,
    },
    "dataset": {
        "train_fraction": 0.9,
        "flip": True,
        "deform_lo": 0,
        "deform_hi": 5,
        "negatives_per_image": 50,
        "max_negatives": 20000,
        "seed": 0,
    },
    "pretrain": {
        "samples_per_class": 120,
        "epochs": 10,
        "batch_size": 100,
        "lr": 0.001,
        "momentum": 0.9,
        "seed": 0,
    },
    "tracker": {
        "process_noise": 0.5,
        "meas_noise": 0.1,
        "gate": 3.0,
        "confirm_frames": 3,
        "max_misses": 15,
        "method": "nn",
        "candidate_gate": 1.0,
        "jpda_detect_prob": 0.9,
        "jpda_clutter": 0.1,
        "jpda_floor": 0.1,
        "jpda_event_cap": 1_000_000,
    },
    "han": {
        "amplitude": 10.0,
        "sigma0": 0.45,
        "sigma_front": 1.2,
        "right_factor": 1.5,
        "moving_threshold": 0.1,
    },
    "replan": {
        "position_delta": 0.2,
        "velocity_delta": 0.1,
        "switch_margin": 0.1,
    },
    "planner": {
        "resolution": 0.1,
    },
    "eval": {
        "iou_threshold": 0.5,
        "calibration_retain": 0.99,
    },
}


def _coerce(default, value, where):
    """Nudge YAML scalars to the default's type (YAML reads `-inf`, `1e-3` as text)."""
    if isinstance(default, bool) or isinstance(value, bool):
        return value
    if isinstance(default, float) and isinstance(value, (int, str)):
        try:
            return float(value)
        except ValueError:
            raise ValueError(f"config key {where!r} expects a number, got {value!r}") from None
    if isinstance(default, int) and isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            raise ValueError(f"config key {where!r} expects an integer, got {value!r}") from None
    return value


def _merge(base, extra, path=""):
    for key, value in extra.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ValueError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValueError(f"config key {where!r} expects a section")
            _merge(base[key], value, where)
        else:
            base[key] = _coerce(base[key], value, where)


def _apply_override(cfg, assignment):
    if "=" not in assignment:
        raise ValueError(f"override {assignment!r} is not key.path=value")
    key_path, raw = assignment.split("=", 1)
    keys = key_path.strip().split(".")
    value = yaml.safe_load(raw)
    node = cfg
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ValueError(f"unknown config section {key!r} in {assignment!r}")
        node = node[key]
    leaf = keys[-1]
    if leaf not in node:
        raise ValueError(f"unknown config key {key_path!r}")
    if isinstance(node[leaf], dict):
        raise ValueError(f"config key {key_path!r} is a section, not a value")
    node[leaf] = _coerce(node[leaf], value, key_path)


def load_config(path=None, overrides=()):
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: config must be a mapping")
        _merge(cfg, loaded)
    for assignment in overrides:
        _apply_override(cfg, assignment)
    return cfg


def cascade_config(cfg):
    c = cfg["cascade"]
    return CascadeConfig(
        stride=int(c["stride"]),
        nms_overlap=float(c["nms_overlap"]),
        cnn_threshold=float(c["cnn_threshold"]),
        score_threshold=float(c["score_threshold"]),
        shrink=int(c["shrink"]),
        scales_per_octave=int(c["scales_per_octave"]),
        smooth=bool(c["smooth"]),
    )


def boost_config(cfg):
    a = cfg["acf_train"]
    side = int(a["window"])
    return BoostConfig(
        window=(side, side),
        tree_counts=tuple(a["tree_counts"]),
        seed=int(a["seed"]),
        feature_fraction=float(a["feature_fraction"]),
        alpha_max=float(a["alpha_max"]),
        initial_negatives=int(a["initial_negatives"]),
        max_negatives=int(a["max_negatives"]),
        mine_per_image=int(a["mine_per_image"]),
        detect_stride=int(a["detect_stride"]),
        reject_margin=float(a["reject_margin"]),
        accept_margin=float(a["accept_margin"]),
        shrink=int(cfg["cascade"]["shrink"]),
    )


def train_config(cfg, section="cnn_train"):
    t = cfg[section]
    return TrainConfig(
        epochs=int(t["epochs"]),
        batch_size=int(t["batch_size"]),
        lr=float(t["lr"]),
        momentum=float(t["momentum"]),
        seed=int(t["seed"]),
    )


def augment_config(cfg):
    d = cfg["dataset"]
    return AugmentConfig(
        flip=bool(d["flip"]),
        deform_lo=int(d["deform_lo"]),
        deform_hi=int(d["deform_hi"]),
        seed=int(d["seed"]),
    )


def tracker_config(cfg):
    t = cfg["tracker"]
    return TrackerConfig(
        process_noise=float(t["process_noise"]),
        meas_noise=float(t["meas_noise"]),
        gate=float(t["gate"]),
        confirm_frames=int(t["confirm_frames"]),
        max_misses=int(t["max_misses"]),
        method=str(t["method"]),
        candidate_gate=float(t["candidate_gate"]),
        jpda_detect_prob=float(t["jpda_detect_prob"]),
        jpda_clutter=float(t["jpda_clutter"]),
        jpda_floor=float(t["jpda_floor"]),
        jpda_event_cap=int(t["jpda_event_cap"]),
    )


def han_config(cfg):
    h = cfg["han"]
    return HanConfig(
        amplitude=float(h["amplitude"]),
        sigma0=float(h["sigma0"]),
        sigma_front=float(h["sigma_front"]),
        right_factor=float(h["right_factor"]),
        moving_threshold=float(h["moving_threshold"]),
    )


def replan_config(cfg):
    r = cfg["replan"]
    return ReplanConfig(
        position_delta=float(r["position_delta"]),
        velocity_delta=float(r["velocity_delta"]),
        switch_margin=float(r["switch_margin"]),
    )


def pipeline_setup(cfg):
    return PipelineSetup(
        cascade=cascade_config(cfg),
        tracker=tracker_config(cfg),
        han=han_config(cfg),
        replan=replan_config(cfg),
        grid_resolution=float(cfg["planner"]["resolution"]),
    )
