"""Grid A* with human-aware costs and a left-overtake social rule.

The cost field around each person is a quadrant-asymmetric Gaussian:
an isotropic personal-space bump for a standing person; for a moving
person the longitudinal std stretches to `sigma_front` ahead of them
(cutting in front is expensive) and the lateral std stretches by
`right_factor` on their right side, so the cheapest way past a walker
is on their left. Fields from several people combine by per-cell max.

Edge cost for a step into a cell is the Euclidean step length times
(1 + total cost at that cell); the heuristic is the Euclidean distance
to the goal times the smallest such multiplier anywhere, which keeps it
admissible and consistent.

Grid text format: header lines `resolution <m>` and `origin <x> <y>`,
then one row of `.` (free) / `#` (occupied) per grid row, row 0 first.
Paths export as `x,y` CSV waypoints.
"""

import heapq
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

_STEPS = [
    (dx, dy)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    if (dx, dy) != (0, 0)
]


@dataclass
class OccupancyGrid:
    resolution: float
    width: int
    height: int
    origin: tuple
    occupied: np.ndarray  # (height, width) bool

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.occupied = np.asarray(self.occupied, dtype=bool)
        if self.occupied.shape != (self.height, self.width):
            raise ValueError(
                f"occupancy array {self.occupied.shape} does not match "
                f"{self.height}x{self.width}"
            )

    @classmethod
    def empty(cls, width, height, resolution, origin=(0.0, 0.0)):
        return cls(resolution, width, height, origin, np.zeros((height, width), dtype=bool))

    def cell_of(self, point):
        ix = int(np.floor((point[0] - self.origin[0]) / self.resolution))
        iy = int(np.floor((point[1] - self.origin[1]) / self.resolution))
        return ix, iy

    def center_of(self, ix, iy):
        return np.array(
            [
                self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution,
            ]
        )

    def in_bounds(self, ix, iy):
        return 0 <= ix < self.width and 0 <= iy < self.height

    def cell_centers(self):
        """(height, width, 2) world coordinates of every cell center."""
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(self.height) + 0.5) * self.resolution
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy], axis=-1)

    def to_text(self):
        lines = [f"resolution {self.resolution}", f"origin {self.origin[0]} {self.origin[1]}"]
        for iy in range(self.height):
            lines.append("".join("#" if self.occupied[iy, ix] else "." for ix in range(self.width)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        resolution = None
        origin = (0.0, 0.0)
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("//"):
                continue
            if stripped.startswith("resolution"):
                resolution = float(stripped.split()[1])
            elif stripped.startswith("origin"):
                parts = stripped.split()
                origin = (float(parts[1]), float(parts[2]))
            else:
                if set(stripped) - {".", "#"}:
                    raise ValueError(f"line {lineno}: grid rows may only contain . and #")
                rows.append([c == "#" for c in stripped])
        if resolution is None:
            raise ValueError("grid text is missing the resolution header")
        if not rows:
            raise ValueError("grid text has no rows")
        if len({len(r) for r in rows}) != 1:
            raise ValueError("grid rows have inconsistent lengths")
        occ = np.array(rows, dtype=bool)
        return cls(resolution, occ.shape[1], occ.shape[0], origin, occ)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())


@dataclass
class HanConfig:
    amplitude: float = 10.0
    sigma0: float = 0.45  # personal-space std, meters
    sigma_front: float = 1.2  # longitudinal std ahead of a walker
    right_factor: float = 1.5  # lateral std multiplier on the right side
    moving_threshold: float = 0.1  # m/s


@dataclass
class PersonState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(2)
        self.velocity = np.asarray(self.velocity, dtype=np.float64).reshape(2)
        if not (np.isfinite(self.position).all() and np.isfinite(self.velocity).all()):
            raise ValueError("person state must be finite")

    def moving(self, threshold):
        return float(np.linalg.norm(self.velocity)) >= threshold


def human_cost_field(grid, people, cfg=None):
    """Per-cell social cost, combined over people by max."""
    cfg = cfg or HanConfig()
    field_ = np.zeros((grid.height, grid.width))
    if not people:
        return field_
    centers = grid.cell_centers()
    for person in people:
        rel = centers - person.position
        if person.moving(cfg.moving_threshold):
            speed = np.linalg.norm(person.velocity)
            e = person.velocity / speed
            left = np.array([-e[1], e[0]])  # 90 degrees counterclockwise
            lon = rel @ e
            lat = rel @ left
            sig_lon = np.where(lon > 0, cfg.sigma_front, cfg.sigma0)
            sig_lat = np.where(lat > 0, cfg.sigma0, cfg.sigma0 * cfg.right_factor)
            cost = cfg.amplitude * np.exp(
                -(lon**2 / (2 * sig_lon**2) + lat**2 / (2 * sig_lat**2))
            )
        else:
            d2 = np.sum(rel**2, axis=-1)
            cost = cfg.amplitude * np.exp(-d2 / (2 * cfg.sigma0**2))
        np.maximum(field_, cost, out=field_)
    return field_


@dataclass
class CostMap:
    grid: OccupancyGrid
    human: np.ndarray

    def __post_init__(self):
        self.human = np.asarray(self.human, dtype=np.float64)
        if self.human.shape != (self.grid.height, self.grid.width):
            raise ValueError("human cost field does not match the grid")
        if (self.human < 0).any() or not np.isfinite(self.human).all():
            raise ValueError("human costs must be finite and non-negative")

    @property
    def total(self):
        t = self.human.copy()
        t[self.grid.occupied] = np.inf
        return t


@dataclass
class PlanResult:
    found: bool
    cells: list = field(default_factory=list)  # (ix, iy)
    waypoints: list = field(default_factory=list)  # world points
    cost: float = float("inf")


def plan_astar(costmap, start, goal):
    """Optimal 8-connected path on the cost map.

    start/goal are world points; both must fall in free in-bounds cells.
    Unreachable goals return PlanResult(found=False) rather than raising.
    Ties in the open list break on (f, h, cell index) so runs are
    reproducible.
    """
    grid = costmap.grid
    total = costmap.total
    sx, sy = grid.cell_of(start)
    gx, gy = grid.cell_of(goal)
    for name, (ix, iy) in (("start", (sx, sy)), ("goal", (gx, gy))):
        if not grid.in_bounds(ix, iy):
            raise ValueError(f"{name} cell ({ix}, {iy}) is outside the grid")
        if grid.occupied[iy, ix]:
            raise ValueError(f"{name} cell ({ix}, {iy}) is occupied")

    res = grid.resolution
    free_min = float(total[~grid.occupied].min()) if (~grid.occupied).any() else 0.0
    h_mult = 1.0 + free_min

    def heuristic(ix, iy):
        return np.hypot(ix - gx, iy - gy) * res * h_mult

    width = grid.width
    start_idx = sy * width + sx
    goal_idx = gy * width + gx
    g_cost = {start_idx: 0.0}
    parent = {}
    h0 = heuristic(sx, sy)
    open_heap = [(h0, h0, start_idx)]
    closed = set()

    while open_heap:
        f, h, idx = heapq.heappop(open_heap)
        if idx in closed:
            continue
        closed.add(idx)
        if idx == goal_idx:
            break
        iy, ix = divmod(idx, width)
        for dx, dy in _STEPS:
            nx, ny = ix + dx, iy + dy
            if not grid.in_bounds(nx, ny):
                continue
            cell_cost = total[ny, nx]
            if not np.isfinite(cell_cost):
                continue
            step = res * (np.sqrt(2.0) if dx and dy else 1.0)
            ng = g_cost[idx] + step * (1.0 + cell_cost)
            nidx = ny * width + nx
            if ng < g_cost.get(nidx, np.inf):
                g_cost[nidx] = ng
                parent[nidx] = idx
                nh = heuristic(nx, ny)
                heapq.heappush(open_heap, (ng + nh, nh, nidx))

    if goal_idx not in closed:
        return PlanResult(found=False)
    cells = []
    idx = goal_idx
    while True:
        iy, ix = divmod(idx, width)
        cells.append((ix, iy))
        if idx == start_idx:
            break
        idx = parent[idx]
    cells.reverse()
    waypoints = [grid.center_of(ix, iy) for ix, iy in cells]
    return PlanResult(True, cells, waypoints, g_cost[goal_idx])


def path_cost(costmap, cells):
    """Cost of walking a cell sequence under the planner's edge model.

    Matches plan_astar exactly: each move pays step length times
    (1 + total cost of the target cell). Infinite if any visited cell is
    blocked or the sequence takes a non-adjacent step.
    """
    if not cells:
        return float("inf")
    total = costmap.total
    res = costmap.grid.resolution
    first = total[cells[0][1], cells[0][0]]
    if not np.isfinite(first):
        return float("inf")
    cost = 0.0
    for (ax, ay), (bx, by) in zip(cells, cells[1:]):
        dx, dy = abs(bx - ax), abs(by - ay)
        if dx > 1 or dy > 1 or (dx == 0 and dy == 0):
            return float("inf")
        cell = total[by, bx]
        if not np.isfinite(cell):
            return float("inf")
        step = res * (np.sqrt(2.0) if dx and dy else 1.0)
        cost += step * (1.0 + cell)
    return cost


@dataclass
class ReplanConfig:
    position_delta: float = 0.2  # meters
    velocity_delta: float = 0.1  # m/s
    switch_margin: float = 0.1  # fresh plan must beat the committed path by this fraction


class Replanner:
    """Replans only when people moved or the robot left the planned path.

    The emitted path always starts at the robot's current cell: reused
    plans are trimmed to the remaining suffix. A freshly computed plan
    replaces the committed one only when it is cheaper by switch_margin
    under the current cost field; without that hysteresis the route
    flip-flops between near-equal left/right detours as tracked people
    drift, and the robot makes no progress.
    """

    def __init__(self, han_cfg=None, cfg=None):
        self.han_cfg = han_cfg or HanConfig()
        self.cfg = cfg or ReplanConfig()
        self.plans_computed = 0
        self._people = None
        self._path = None
        self._goal = None

    def _people_changed(self, people):
        if self._people is None or len(people) != len(self._people):
            return True
        for new, old in zip(people, self._people):
            if np.linalg.norm(new.position - old.position) > self.cfg.position_delta:
                return True
            if np.linalg.norm(new.velocity - old.velocity) > self.cfg.velocity_delta:
                return True
        return False

    def _trimmed(self, robot_cell):
        """Committed path cut to start at the robot's cell, or None."""
        if self._path is None or not self._path.found:
            return None
        if robot_cell not in self._path.cells:
            return None
        i = self._path.cells.index(robot_cell)
        return PlanResult(
            True,
            self._path.cells[i:],
            self._path.waypoints[i:],
            self._path.cost,
        )

    def step(self, grid, people, robot_pos, goal):
        robot_cell = grid.cell_of(robot_pos)
        goal_cell = grid.cell_of(goal)
        committed = self._trimmed(robot_cell) if goal_cell == self._goal else None
        need = committed is None or self._people_changed(people)
        if not need:
            self._path = committed
            return committed

        costmap = CostMap(grid, human_cost_field(grid, people, self.han_cfg))
        path = plan_astar(costmap, robot_pos, goal)
        self.plans_computed += 1
        self._people = [PersonState(p.position.copy(), p.velocity.copy()) for p in people]
        self._goal = goal_cell
        if committed is not None and path.found:
            held = path_cost(costmap, committed.cells)
            if path.cost >= (1.0 - self.cfg.switch_margin) * held:
                committed.cost = held
                self._path = committed
                return committed
        self._path = path
        return path


def write_path_csv(path, waypoints):
    lines = ["x,y"]
    for p in waypoints:
        lines.append(f"{p[0]:.6f},{p[1]:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_path_csv(path):
    lines = Path(path).read_text().splitlines()
    pts = []
    for line in lines[1:]:
        if not line.strip():
            continue
        x, y = line.split(",")
        pts.append(np.array([float(x), float(y)]))
    return pts
