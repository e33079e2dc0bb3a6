"""Layered configuration: defaults, YAML files, dotted overrides, builders."""

import math

import pytest

from pednav import config as cfgmod
from pednav.config import DEFAULTS, load_config


def test_defaults_are_deep_copied():
    cfg = load_config()
    assert cfg == DEFAULTS
    cfg["cascade"]["stride"] = 99
    cfg["acf_train"]["tree_counts"].append(4096)
    assert DEFAULTS["cascade"]["stride"] == 1
    assert DEFAULTS["acf_train"]["tree_counts"] == [32, 128, 512, 2048]


def test_yaml_file_merges_over_defaults(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(
        "cascade:\n"
        "  stride: 2\n"
        "  smooth: false\n"
        "tracker:\n"
        "  method: nnjpda\n"
    )
    cfg = load_config(p)
    assert cfg["cascade"]["stride"] == 2
    assert cfg["cascade"]["smooth"] is False
    assert cfg["tracker"]["method"] == "nnjpda"
    # untouched keys keep their defaults
    assert cfg["cascade"]["nms_overlap"] == 0.5
    assert cfg["han"]["sigma0"] == 0.45


def test_empty_yaml_file_is_just_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    assert load_config(p) == DEFAULTS


def test_yaml_file_must_be_a_mapping(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("- a\n- b\n")
    with pytest.raises(ValueError, match="must be a mapping"):
        load_config(p)


def test_missing_yaml_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "nope.yaml")


def test_unknown_top_level_key_rejected(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("casacde:\n  stride: 2\n")
    with pytest.raises(ValueError, match="unknown config key 'casacde'"):
        load_config(p)


def test_unknown_nested_key_rejected_with_dotted_path(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("cascade:\n  strdie: 2\n")
    with pytest.raises(ValueError, match="unknown config key 'cascade.strdie'"):
        load_config(p)


def test_section_replaced_by_scalar_rejected(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("cascade: 3\n")
    with pytest.raises(ValueError, match="expects a section"):
        load_config(p)


def test_yaml_string_coerced_to_float(tmp_path):
    # YAML reads -inf and 1e-3 as plain strings; the loader nudges them to
    # the default's type so downstream code never sees a str where a float goes
    p = tmp_path / "run.yaml"
    p.write_text("cascade:\n  score_threshold: -inf\n  nms_overlap: 1e-1\n")
    cfg = load_config(p)
    assert cfg["cascade"]["score_threshold"] == float("-inf")
    assert cfg["cascade"]["nms_overlap"] == pytest.approx(0.1)


def test_int_accepted_where_float_expected(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("han:\n  amplitude: 4\n")
    cfg = load_config(p)
    assert cfg["han"]["amplitude"] == 4.0
    assert isinstance(cfg["han"]["amplitude"], float)


def test_non_numeric_string_for_float_rejected(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("han:\n  amplitude: tall\n")
    with pytest.raises(ValueError, match="expects a number"):
        load_config(p)


def test_override_scalars_parse_as_yaml():
    cfg = load_config(
        overrides=[
            "cascade.stride=2",
            "cascade.smooth=false",
            "cascade.score_threshold=-inf",
            "tracker.method=nnjpda",
            "acf_train.tree_counts=[16, 64]",
            "cnn_train.lr=5e-4",
        ]
    )
    assert cfg["cascade"]["stride"] == 2
    assert cfg["cascade"]["smooth"] is False
    assert cfg["cascade"]["score_threshold"] == float("-inf")
    assert cfg["tracker"]["method"] == "nnjpda"
    assert cfg["acf_train"]["tree_counts"] == [16, 64]
    assert cfg["cnn_train"]["lr"] == pytest.approx(5e-4)


def test_override_value_may_contain_equals():
    # only the first = splits; the rest belongs to the value
    cfg = load_config(overrides=["tracker.method=a=b"])
    assert cfg["tracker"]["method"] == "a=b"


@pytest.mark.parametrize(
    "assignment, msg",
    [
        ("cascade.stride", "is not key.path=value"),
        ("nosuch.key=1", "unknown config section 'nosuch'"),
        ("cascade.nope=1", "unknown config key 'cascade.nope'"),
        ("cascade=1", "is a section, not a value"),
        ("cascade.stride.extra=1", "unknown config section 'stride'"),
    ],
)
def test_override_error_cases(assignment, msg):
    with pytest.raises(ValueError, match=msg.replace("[", "\\[")):
        load_config(overrides=[assignment])


def test_overrides_win_over_file(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("cascade:\n  stride: 2\n  nms_overlap: 0.3\n")
    cfg = load_config(p, overrides=["cascade.stride=4"])
    assert cfg["cascade"]["stride"] == 4
    assert cfg["cascade"]["nms_overlap"] == 0.3


def test_boost_config_builder():
    cfg = load_config(overrides=["acf_train.window=32", "cascade.shrink=2"])
    bc = cfgmod.boost_config(cfg)
    assert bc.window == (32, 32)
    assert bc.tree_counts == (32, 128, 512, 2048)
    assert bc.shrink == 2  # block size rides along from the cascade section
    assert bc.feature_fraction == 0.125


def test_cascade_config_builder():
    cc = cfgmod.cascade_config(load_config(overrides=["cascade.scales_per_octave=4"]))
    assert cc.scales_per_octave == 4
    assert cc.stride == 1
    assert math.isinf(cc.score_threshold) and cc.score_threshold < 0
    assert cc.smooth is True


def test_train_config_builder_reads_named_section():
    cfg = load_config(overrides=["pretrain.epochs=2", "cnn_train.epochs=7"])
    assert cfgmod.train_config(cfg).epochs == 7
    assert cfgmod.train_config(cfg, "pretrain").epochs == 2
    assert cfgmod.train_config(cfg, "pretrain").batch_size == 100


def test_tracker_and_han_and_replan_builders():
    cfg = load_config(
        overrides=[
            "tracker.gate=2.5",
            "han.right_factor=2.0",
            "replan.switch_margin=0.25",
        ]
    )
    assert cfgmod.tracker_config(cfg).gate == 2.5
    assert cfgmod.tracker_config(cfg).method == "nn"
    assert cfgmod.han_config(cfg).right_factor == 2.0
    assert cfgmod.replan_config(cfg).switch_margin == 0.25


def test_pipeline_setup_wires_all_sections():
    cfg = load_config(overrides=["planner.resolution=0.2", "tracker.method=nnjpda"])
    setup = cfgmod.pipeline_setup(cfg)
    assert setup.cascade.stride == 1
    assert setup.tracker.method == "nnjpda"
    assert setup.han.sigma0 == 0.45
    assert setup.replan.position_delta == 0.2
    assert setup.grid_resolution == 0.2
