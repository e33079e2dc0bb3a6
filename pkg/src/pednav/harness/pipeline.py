"""End-to-end scripted runs: render, detect, project, track, plan, drive.

Each frame produces a FrameRecord; records are deterministic given the
scenario seed, the model files, and the config (timing fields excluded).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..cascade import detect_pedestrians
from ..geometry import foot_point, project_points
from ..planner import OccupancyGrid, PersonState, Replanner
from ..tracker import TrackerWorld
from .render import render_frame

log = logging.getLogger(__name__)


@dataclass
class FrameRecord:
    frame_id: int
    ground_truth: list
    detections: list
    tracks: list  # (id, px, py, vx, vy, status) snapshots
    path: object  # PlanResult
    robot_position: np.ndarray
    timing: object


@dataclass
class PipelineSetup:
    cascade: object
    tracker: object = None
    han: object = None
    replan: object = None
    grid_resolution: float = 0.1


def _advance(robot, path, distance):
    """Move along the planned polyline by the given distance."""
    if not path.found or len(path.waypoints) == 0 or distance <= 0:
        return robot
    pos = robot.copy()
    targets = list(path.waypoints[1:]) if len(path.waypoints) > 1 else []
    if not targets:
        targets = [path.waypoints[0]]
    for wp in targets:
        seg = wp - pos
        seg_len = float(np.linalg.norm(seg))
        if seg_len >= distance:
            if seg_len > 0:
                pos = pos + seg * (distance / seg_len)
            return pos
        pos = wp.copy()
        distance -= seg_len
    return pos


def run_pipeline(script, acf_model, cnn_model, setup):
    """Run the whole stack over a scenario; returns one record per frame."""
    grid = _grid_for(script, setup.grid_resolution)
    tracker = TrackerWorld(setup.tracker)
    replanner = Replanner(setup.han, setup.replan)
    robot = script.robot_start.astype(np.float64).copy()
    goal = script.robot_goal
    records = []

    for frame in range(script.duration):
        img, gts = render_frame(script, frame)
        detections, timing = detect_pedestrians(img, acf_model, cnn_model, setup.cascade)

        if detections:
            feet = np.array([foot_point(d.box) for d in detections])
            measurements, _ = project_points(feet, script.homography)
        else:
            measurements = np.zeros((0, 2))
        confirmed = tracker.step(measurements, script.dt)
        people = [
            PersonState(t.state.mean[:2].copy(), t.state.mean[2:].copy()) for t in confirmed
        ]

        path = replanner.step(grid, people, robot, goal)
        step_len = script.robot_speed * script.dt
        if np.linalg.norm(goal - robot) > 1e-9:
            robot = _advance(robot, path, step_len)
            if np.linalg.norm(goal - robot) < step_len:
                robot = goal.astype(np.float64).copy()

        records.append(
            FrameRecord(
                frame_id=frame,
                ground_truth=gts,
                detections=detections,
                tracks=[
                    (
                        t.id,
                        float(t.state.mean[0]),
                        float(t.state.mean[1]),
                        float(t.state.mean[2]),
                        float(t.state.mean[3]),
                        t.status,
                    )
                    for t in confirmed
                ],
                path=path,
                robot_position=robot.copy(),
                timing=timing,
            )
        )
    log.info(
        "pipeline: %d frames, %d plans, final robot position (%.2f, %.2f)",
        script.duration,
        replanner.plans_computed,
        robot[0],
        robot[1],
    )
    return records


def _grid_for(script, resolution):
    x0, y0, x1, y1 = script.world_bounds
    width = int(np.ceil((x1 - x0) / resolution))
    height = int(np.ceil((y1 - y0) / resolution))
    return OccupancyGrid.empty(width, height, resolution, origin=(x0, y0))


def detection_rows(records):
    for rec in records:
        for det in rec.detections:
            yield rec.frame_id, det


def track_rows(records):
    for rec in records:
        for row in rec.tracks:
            yield (rec.frame_id, *row)


def trajectory(records):
    return [rec.robot_position for rec in records]
