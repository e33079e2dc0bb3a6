"""Scenario script: a small sectioned text format describing one run.

Example:

    # two people, one walker
    duration 100
    framerate 10
    seed 7
    imagesize 320 240
    worldbounds 0 0 12 10

    camera
    10 230 1.0 1.0     # u v X Y correspondences, 4 or more
    310 230 11.0 1.0
    60 140 2.0 7.0
    280 140 10.5 7.5
    end

    robot start 1.0 5.0 goal 11.0 5.0 speed 1.0

    person 1
    0.0 6.0 4.0        # t x y waypoints, piecewise linear
    10.0 6.0 4.0
    end

`#` starts a comment anywhere on a line. A person holds the first
waypoint before its time and the last one after; sprite appearance is
seeded by the person id.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import calibrate_homography


@dataclass
class PersonScript:
    sprite_id: int
    times: np.ndarray  # seconds, ascending
    points: np.ndarray  # (n, 2) world meters

    def position(self, t):
        if t <= self.times[0]:
            return self.points[0].copy()
        if t >= self.times[-1]:
            return self.points[-1].copy()
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        t0, t1 = self.times[i], self.times[i + 1]
        a = (t - t0) / (t1 - t0)
        return (1 - a) * self.points[i] + a * self.points[i + 1]

    def velocity(self, t):
        if t < self.times[0] or t >= self.times[-1]:
            return np.zeros(2)
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        t0, t1 = self.times[i], self.times[i + 1]
        return (self.points[i + 1] - self.points[i]) / (t1 - t0)


@dataclass
class ScenarioScript:
    duration: int  # frames
    framerate: float  # Hz
    seed: int
    image_size: tuple  # (width, height)
    world_bounds: tuple  # (x0, y0, x1, y1)
    image_points: np.ndarray
    world_points: np.ndarray
    robot_start: np.ndarray
    robot_goal: np.ndarray
    robot_speed: float
    people: list = field(default_factory=list)
    homography: object = None  # image -> world, from the correspondences

    def __post_init__(self):
        if self.framerate <= 0:
            raise ValueError("framerate must be positive")
        if self.duration < 1:
            raise ValueError("duration must be at least one frame")
        if self.homography is None:
            self.homography = calibrate_homography(self.image_points, self.world_points)
        x0, y0, x1, y1 = self.world_bounds
        for p in self.people:
            pts = p.points
            if (
                pts[:, 0].min() < x0
                or pts[:, 1].min() < y0
                or pts[:, 0].max() > x1
                or pts[:, 1].max() > y1
            ):
                raise ValueError(f"person {p.sprite_id} trajectory leaves the world bounds")

    @property
    def dt(self):
        return 1.0 / self.framerate


def _clean_lines(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield lineno, body


def parse_scenario(text):
    duration = framerate = seed = None
    image_size = world_bounds = None
    cam_img, cam_wld = [], []
    robot = {}
    people = []
    lines = list(_clean_lines(text))
    i = 0

    def fail(lineno, msg):
        raise ValueError(f"scenario line {lineno}: {msg}")

    while i < len(lines):
        lineno, body = lines[i]
        parts = body.split()
        key = parts[0]
        try:
            if key == "duration":
                duration = int(parts[1])
            elif key == "framerate":
                framerate = float(parts[1])
            elif key == "seed":
                seed = int(parts[1])
            elif key == "imagesize":
                image_size = (int(parts[1]), int(parts[2]))
            elif key == "worldbounds":
                world_bounds = tuple(float(p) for p in parts[1:5])
                if len(world_bounds) != 4:
                    fail(lineno, "worldbounds needs x0 y0 x1 y1")
            elif key == "camera":
                i += 1
                while i < len(lines) and lines[i][1] != "end":
                    ln, row = lines[i]
                    vals = row.split()
                    if len(vals) != 4:
                        fail(ln, "camera rows are `u v X Y`")
                    cam_img.append((float(vals[0]), float(vals[1])))
                    cam_wld.append((float(vals[2]), float(vals[3])))
                    i += 1
                if i >= len(lines):
                    fail(lineno, "camera block missing `end`")
            elif key == "robot":
                if len(parts) != 9 or parts[1] != "start" or parts[4] != "goal" or parts[7] != "speed":
                    fail(lineno, "robot line is `robot start X Y goal X Y speed S`")
                robot = {
                    "start": np.array([float(parts[2]), float(parts[3])]),
                    "goal": np.array([float(parts[5]), float(parts[6])]),
                    "speed": float(parts[8]),
                }
            elif key == "person":
                sprite = int(parts[1])
                times, pts = [], []
                i += 1
                while i < len(lines) and lines[i][1] != "end":
                    ln, row = lines[i]
                    vals = row.split()
                    if len(vals) != 3:
                        fail(ln, "person rows are `t x y`")
                    times.append(float(vals[0]))
                    pts.append((float(vals[1]), float(vals[2])))
                    i += 1
                if i >= len(lines):
                    fail(lineno, "person block missing `end`")
                if not times:
                    fail(lineno, "person block has no waypoints")
                times_a = np.asarray(times)
                if (np.diff(times_a) <= 0).any():
                    fail(lineno, "person waypoint times must increase")
                people.append(PersonScript(sprite, times_a, np.asarray(pts, dtype=np.float64)))
            else:
                fail(lineno, f"unknown directive {key!r}")
        except (ValueError, IndexError) as e:
            if "scenario line" in str(e):
                raise
            fail(lineno, f"cannot parse {body!r}")
        i += 1

    missing = [
        name
        for name, val in [
            ("duration", duration),
            ("framerate", framerate),
            ("seed", seed),
            ("imagesize", image_size),
            ("worldbounds", world_bounds),
            ("camera", cam_img or None),
            ("robot", robot or None),
        ]
        if val is None
    ]
    if missing:
        raise ValueError(f"scenario is missing: {', '.join(missing)}")
    if len(cam_img) < 4:
        raise ValueError("camera block needs at least 4 correspondences")
    return ScenarioScript(
        duration=duration,
        framerate=framerate,
        seed=seed,
        image_size=image_size,
        world_bounds=world_bounds,
        image_points=np.asarray(cam_img),
        world_points=np.asarray(cam_wld),
        robot_start=robot["start"],
        robot_goal=robot["goal"],
        robot_speed=robot["speed"],
        people=people,
    )


def load_scenario(path):
    return parse_scenario(Path(path).read_text())


def write_scenario(path, script):
    lines = [
        f"duration {script.duration}",
        f"framerate {script.framerate}",
        f"seed {script.seed}",
        f"imagesize {script.image_size[0]} {script.image_size[1]}",
        "worldbounds " + " ".join(str(v) for v in script.world_bounds),
        "camera",
    ]
    for (u, v), (x, y) in zip(script.image_points, script.world_points):
        lines.append(f"{u} {v} {x} {y}")
    lines.append("end")
    lines.append(
        f"robot start {script.robot_start[0]} {script.robot_start[1]} "
        f"goal {script.robot_goal[0]} {script.robot_goal[1]} speed {script.robot_speed}"
    )
    for p in script.people:
        lines.append(f"person {p.sprite_id}")
        for t, (x, y) in zip(p.times, p.points):
            lines.append(f"{t} {x} {y}")
        lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")
