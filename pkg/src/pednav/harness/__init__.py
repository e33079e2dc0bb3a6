"""Synthetic-scene harness: scenarios, rendering, pipeline, evaluation."""

from .metrics import DetectionMetrics, evaluate_detections, log_average_miss_rate
from .pipeline import FrameRecord, PipelineSetup, run_pipeline
from .render import person_box, render_frame, world_to_image
from .scenario import ScenarioScript, load_scenario, parse_scenario, write_scenario
from .shapes import N_SHAPE_CLASSES, make_shape_dataset
from .timing import bench_timing

__all__ = [
    "DetectionMetrics",
    "FrameRecord",
    "N_SHAPE_CLASSES",
    "PipelineSetup",
    "ScenarioScript",
    "bench_timing",
    "evaluate_detections",
    "load_scenario",
    "log_average_miss_rate",
    "make_shape_dataset",
    "parse_scenario",
    "person_box",
    "render_frame",
    "run_pipeline",
    "world_to_image",
    "write_scenario",
]
