"""Command-line front end.

Verbs: pretrain, train-acf, build-dataset, train-cnn, detect, track,
simulate, eval, bench. Every verb accepts `--config file.yaml` and
repeatable `--set section.key=value` overrides on top of built-in
defaults.

Exit codes: 0 success, 1 usage error, 2 data/input error, 3 failed
eval/bench assertion.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .acf import TreeEnsemble, detect as acf_detect, nms, train_acf
from .boxes import BoundingBox, iou
from .cascade import (
    DatasetSpec,
    build_training_set,
    calibrate_score_threshold,
    crop_box,
    detect_pedestrians,
    write_detections,
)
from .cnn import CnnModel, fit, transfer_init
from .harness import (
    bench_timing,
    evaluate_detections,
    load_scenario,
    make_shape_dataset,
    render_frame,
    run_pipeline,
)
from .harness.metrics import format_metrics
from .harness.pipeline import detection_rows, track_rows, trajectory
from .imgio import load_image
from .planner import write_path_csv
from .pyramid import build_pyramid
from .tracker import write_track_log

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ASSERT = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(sub):
    sub.add_argument("--config", default=None, help="YAML config file")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config value (dotted path), repeatable",
    )
    sub.add_argument("--verbose", action="store_true", help="log progress to stderr")


def build_parser():
    parser = _Parser(prog="pednav", description=__doc__)
    subs = parser.add_subparsers(dest="verb", required=True)

    p = subs.add_parser("pretrain", help="train the auxiliary shape classifier")
    p.add_argument("--out", required=True, help="output model file")
    _add_common(p)

    p = subs.add_parser("train-acf", help="train the proposal detector on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=30, help="frames sampled for crops")
    _add_common(p)

    p = subs.add_parser("build-dataset", help="assemble the refinement training set")
    p.add_argument("--scenario", required=True)
    p.add_argument("--acf", required=True, help="proposal detector used as the miner")
    p.add_argument("--out", required=True, help="output .npz dataset")
    p.add_argument("--frames", type=int, default=30)
    _add_common(p)

    p = subs.add_parser("train-cnn", help="fine-tune the refinement network")
    p.add_argument("--dataset", required=True, help=".npz from build-dataset")
    p.add_argument("--pretrained", default=None, help="auxiliary model to transfer from")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = subs.add_parser("detect", help="detect pedestrians on one frame or image")
    p.add_argument("--acf", required=True)
    p.add_argument("--cnn", default=None)
    p.add_argument("--scenario", default=None)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--image", default=None, help="detect on an image file instead")
    p.add_argument("--out", required=True, help="detections text file")
    _add_common(p)

    p = subs.add_parser("track", help="run the pipeline, write the track log")
    p.add_argument("--scenario", required=True)
    p.add_argument("--acf", required=True)
    p.add_argument("--cnn", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = subs.add_parser("simulate", help="full run: detections, tracks, paths")
    p.add_argument("--scenario", required=True)
    p.add_argument("--acf", required=True)
    p.add_argument("--cnn", required=True)
    p.add_argument("--out-dir", required=True)
    _add_common(p)

    p = subs.add_parser("eval", help="detection metrics over a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--acf", required=True)
    p.add_argument("--cnn", default=None)
    p.add_argument("--min-recall", type=float, default=None)
    p.add_argument("--max-lamr", type=float, default=None)
    _add_common(p)

    p = subs.add_parser("bench", help="baseline vs thresholded timing table")
    p.add_argument("--scenario", required=True)
    p.add_argument("--acf", required=True)
    p.add_argument("--cnn", required=True)
    p.add_argument("--calibration-frames", type=int, default=10)
    _add_common(p)

    return parser


# Fixed shift/scale perturbations applied to every ground-truth crop when
# harvesting proposal-detector positives. Sliding windows meet people a
# little off-center and off-scale, so the trees must tolerate the same.
_CROP_JITTER = ((0.0, 0.0, 1.0), (0.06, -0.04, 1.1), (-0.05, 0.05, 0.92))


def _scenario_crops(script, n_frames, cfg):
    """Jittered ground-truth crops plus person-free frames from a scenario."""
    step = max(1, script.duration // n_frames)
    frames = range(0, script.duration, step)
    side = int(cfg["acf_train"]["window"])
    positives = []
    backgrounds = []
    for f in frames:
        img, boxes = render_frame(script, f)
        for box in boxes:
            for dx, dy, ds in _CROP_JITTER:
                jit = BoundingBox(
                    box.x + dx * box.w - (ds - 1.0) * box.w / 2,
                    box.y + dy * box.h - (ds - 1.0) * box.h / 2,
                    ds * box.w,
                    ds * box.h,
                )
                positives.append(crop_box(img, jit, side=side))
        bg, _ = render_frame(script, f, include_people=False)
        backgrounds.append(bg)
    return positives, backgrounds


def cmd_pretrain(args, cfg):
    pcfg = cfg["pretrain"]
    x, y = make_shape_dataset(int(pcfg["samples_per_class"]), seed=int(pcfg["seed"]))
    n_val = max(1, len(x) // 10)
    model = CnnModel(n_classes=8, seed=int(pcfg["seed"]))
    logbook = fit(
        model,
        x[n_val:],
        y[n_val:],
        x[:n_val],
        y[:n_val],
        cfgmod.train_config(cfg, "pretrain"),
    )
    model.save(args.out)
    final = logbook.final
    print(
        f"pretrained on {len(x)} shapes: val accuracy {final.val_accuracy:.3f}, "
        f"saved to {args.out}"
    )
    return EXIT_OK


def cmd_train_acf(args, cfg):
    script = load_scenario(args.scenario)
    positives, backgrounds = _scenario_crops(script, args.frames, cfg)
    if not positives:
        raise ValueError("scenario produced no ground-truth crops")
    model = train_acf(positives, backgrounds, cfgmod.boost_config(cfg))
    model.save(args.out)
    print(
        f"trained {model.n_trees} trees on {len(positives)} positives, "
        f"saved to {args.out}"
    )
    return EXIT_OK


def cmd_build_dataset(args, cfg):
    script = load_scenario(args.scenario)
    miner = TreeEnsemble.load(args.acf)
    step = max(1, script.duration // args.frames)
    frames = range(0, script.duration, step)
    positives = []
    backgrounds = []
    for f in frames:
        img, boxes = render_frame(script, f)
        positives.append((img, boxes))
        bg, _ = render_frame(script, f, include_people=False)
        backgrounds.append(bg)
    d = cfg["dataset"]
    dataset = build_training_set(
        positives,
        backgrounds,
        aug=cfgmod.augment_config(cfg),
        miner=miner,
        train_fraction=float(d["train_fraction"]),
        seed=int(d["seed"]),
        negatives_per_image=int(d["negatives_per_image"]),
        max_negatives=int(d["max_negatives"]),
    )
    dataset.save(args.out)
    print(
        f"dataset: {len(dataset.y_train)} train / {len(dataset.y_val)} val "
        f"({int(dataset.y_train.sum())} train positives), saved to {args.out}"
    )
    return EXIT_OK


def cmd_train_cnn(args, cfg):
    dataset = DatasetSpec.load(args.dataset)
    seed = int(cfg["cnn_train"]["seed"])
    if args.pretrained:
        source = CnnModel.load(args.pretrained)
        model = transfer_init(source, n_classes=2, seed=seed)
    else:
        model = CnnModel(n_classes=2, seed=seed)
    logbook = fit(
        model,
        dataset.x_train,
        dataset.y_train,
        dataset.x_val,
        dataset.y_val,
        cfgmod.train_config(cfg),
    )
    model.save(args.out)
    final = logbook.final
    print(
        f"trained {len(logbook.epochs)} epochs: train loss {final.train_loss:.4f}, "
        f"val accuracy {final.val_accuracy:.4f}, saved to {args.out}"
    )
    return EXIT_OK


def cmd_detect(args, cfg):
    acf_model = TreeEnsemble.load(args.acf)
    cnn_model = CnnModel.load(args.cnn) if args.cnn else None
    if args.image:
        img = load_image(args.image)
        frame_id = 0
    elif args.scenario:
        script = load_scenario(args.scenario)
        img, _ = render_frame(script, args.frame)
        frame_id = args.frame
    else:
        raise ValueError("detect needs --image or --scenario")
    detections, timing = detect_pedestrians(img, acf_model, cnn_model, cfgmod.cascade_config(cfg))
    write_detections(args.out, [(frame_id, d) for d in detections])
    print(
        f"{len(detections)} detections in {timing.total_time:.3f}s "
        f"({timing.cnn_calls} network calls), written to {args.out}"
    )
    return EXIT_OK


def _run(args, cfg, cnn_required=True):
    script = load_scenario(args.scenario)
    acf_model = TreeEnsemble.load(args.acf)
    cnn_path = getattr(args, "cnn", None)
    cnn_model = CnnModel.load(cnn_path) if cnn_path else None
    if cnn_required and cnn_model is None:
        raise ValueError("this verb needs --cnn")
    records = run_pipeline(script, acf_model, cnn_model, cfgmod.pipeline_setup(cfg))
    return script, records


def cmd_track(args, cfg):
    _, records = _run(args, cfg)
    write_track_log(args.out, track_rows(records))
    n = sum(len(r.tracks) for r in records)
    print(f"{n} track states over {len(records)} frames, written to {args.out}")
    return EXIT_OK


def cmd_simulate(args, cfg):
    script, records = _run(args, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_detections(out / "detections.txt", detection_rows(records))
    write_track_log(out / "tracks.txt", track_rows(records))
    write_path_csv(out / "trajectory.csv", trajectory(records))
    final_plan = records[-1].path
    write_path_csv(out / "planned_path.csv", final_plan.waypoints if final_plan.found else [])
    timing_lines = ["# frameId acfTime cnnTime totalTime fps cnnCalls"]
    for r in records:
        t = r.timing
        timing_lines.append(
            f"{r.frame_id} {t.acf_time:.6f} {t.cnn_time:.6f} "
            f"{t.total_time:.6f} {t.fps:.3f} {t.cnn_calls}"
        )
    (out / "timing.txt").write_text("\n".join(timing_lines) + "\n")
    n_det = sum(len(r.detections) for r in records)
    print(
        f"simulated {len(records)} frames: {n_det} detections, "
        f"robot at ({records[-1].robot_position[0]:.2f}, "
        f"{records[-1].robot_position[1]:.2f}), outputs in {out}"
    )
    return EXIT_OK


def cmd_eval(args, cfg):
    _, records = _run(args, cfg, cnn_required=False)
    metrics = evaluate_detections(records, float(cfg["eval"]["iou_threshold"]))
    print(format_metrics(metrics), end="")
    failed = []
    if args.min_recall is not None and metrics.recall < args.min_recall:
        failed.append(f"recall {metrics.recall:.4f} < required {args.min_recall}")
    if args.max_lamr is not None and metrics.lamr > args.max_lamr:
        failed.append(f"log-avg miss rate {metrics.lamr:.4f} > allowed {args.max_lamr}")
    if failed:
        for f in failed:
            print(f"ASSERTION FAILED: {f}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def _calibrate_threshold(script, acf_model, cfg, n_frames):
    """Matched-proposal scores on a few frames -> retain-99% threshold."""
    retain = float(cfg["eval"]["calibration_retain"])
    ccfg = cfgmod.cascade_config(cfg)
    step = max(1, script.duration // n_frames)
    tp_scores = []
    for f in range(0, script.duration, step):
        img, gts = render_frame(script, f)
        pyr = build_pyramid(
            img,
            acf_model.window,
            shrink=ccfg.shrink,
            scales_per_octave=ccfg.scales_per_octave,
            smooth=ccfg.smooth,
        )
        props = nms(acf_detect(pyr, acf_model, stride=ccfg.stride), ccfg.nms_overlap)
        for p in props:
            if any(iou(p.box, gt) >= 0.5 for gt in gts):
                tp_scores.append(p.score)
    return calibrate_score_threshold(tp_scores, retain)


def cmd_bench(args, cfg):
    script = load_scenario(args.scenario)
    acf_model = TreeEnsemble.load(args.acf)
    cnn_model = CnnModel.load(args.cnn)
    threshold = _calibrate_threshold(script, acf_model, cfg, args.calibration_frames)

    setup = cfgmod.pipeline_setup(cfg)
    setup.cascade.score_threshold = float("-inf")
    baseline = run_pipeline(script, acf_model, cnn_model, setup)
    setup.cascade.score_threshold = threshold
    thresholded = run_pipeline(script, acf_model, cnn_model, setup)

    report = bench_timing(baseline, thresholded)
    print(f"calibrated score threshold: {threshold:.3f}")
    print(report.table())
    if not report.speedup_ok:
        return EXIT_ASSERT
    return EXIT_OK


_COMMANDS = {
    "pretrain": cmd_pretrain,
    "train-acf": cmd_train_acf,
    "build-dataset": cmd_build_dataset,
    "train-cnn": cmd_train_cnn,
    "detect": cmd_detect,
    "track": cmd_track,
    "simulate": cmd_simulate,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = cfgmod.load_config(args.config, args.overrides)
        return _COMMANDS[args.verb](args, cfg)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, KeyError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
