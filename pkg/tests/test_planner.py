"""Grids, social cost fields, A* optimality, and the replanning policy."""

import heapq

import numpy as np
import pytest

from pednav.planner import (
    CostMap,
    HanConfig,
    OccupancyGrid,
    PersonState,
    Replanner,
    ReplanConfig,
    human_cost_field,
    path_cost,
    plan_astar,
    read_path_csv,
    write_path_csv,
)

# ------------------------------------------------------------------- grids


def test_cell_round_trip():
    g = OccupancyGrid.empty(10, 8, 0.5, origin=(1.0, 2.0))
    assert g.cell_of((1.0, 2.0)) == (0, 0)
    assert g.cell_of((5.99, 5.99)) == (9, 7)
    c = g.center_of(3, 4)
    assert np.allclose(c, [1.0 + 3.5 * 0.5, 2.0 + 4.5 * 0.5])
    assert g.cell_of(c) == (3, 4)
    assert g.in_bounds(0, 0) and g.in_bounds(9, 7)
    assert not g.in_bounds(10, 0) and not g.in_bounds(0, -1)


def test_grid_text_round_trip(tmp_path):
    text = "// a wall on the right\nresolution 0.25\norigin -1 2\n....#\n....#\n.....\n"
    g = OccupancyGrid.from_text(text)
    assert (g.width, g.height) == (5, 3)
    assert g.resolution == 0.25
    assert g.origin == (-1.0, 2.0)
    assert g.occupied[0, 4] and g.occupied[1, 4] and not g.occupied[2, 4]
    path = tmp_path / "grid.txt"
    g.save(path)
    back = OccupancyGrid.load(path)
    assert back.resolution == g.resolution
    assert back.origin == g.origin
    assert np.array_equal(back.occupied, g.occupied)


def test_grid_text_errors():
    with pytest.raises(ValueError, match="resolution"):
        OccupancyGrid.from_text("....\n....\n")
    with pytest.raises(ValueError, match="only contain"):
        OccupancyGrid.from_text("resolution 1\n..x.\n")
    with pytest.raises(ValueError, match="inconsistent"):
        OccupancyGrid.from_text("resolution 1\n....\n...\n")
    with pytest.raises(ValueError, match="no rows"):
        OccupancyGrid.from_text("resolution 1\n")


def test_cell_centers_layout():
    g = OccupancyGrid.empty(3, 2, 1.0)
    centers = g.cell_centers()
    assert centers.shape == (2, 3, 2)
    assert np.allclose(centers[0, 0], [0.5, 0.5])
    assert np.allclose(centers[1, 2], [2.5, 1.5])


# -------------------------------------------------------------- cost field


def _field_at(grid, field_, point):
    ix, iy = grid.cell_of(point)
    return field_[iy, ix]


def test_cost_field_empty_without_people():
    g = OccupancyGrid.empty(8, 8, 0.5)
    assert not human_cost_field(g, []).any()


def test_standing_person_cost_is_isotropic_and_peaked():
    g = OccupancyGrid.empty(41, 41, 0.1)
    cfg = HanConfig()
    center = g.center_of(20, 20)
    field_ = human_cost_field(g, [PersonState(center, [0.0, 0.0])], cfg)
    assert field_[20, 20] == pytest.approx(cfg.amplitude)
    # four compass points one meter out carry the identical cost
    vals = [
        _field_at(g, field_, center + np.array(d))
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1))
    ]
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)
    assert vals[0] == pytest.approx(vals[2], rel=1e-12)
    assert vals[0] == pytest.approx(vals[3], rel=1e-12)
    want = cfg.amplitude * np.exp(-1.0 / (2 * cfg.sigma0**2))
    assert vals[0] == pytest.approx(want, rel=1e-9)


def test_walker_cost_reaches_farther_ahead():
    g = OccupancyGrid.empty(81, 81, 0.1)
    cfg = HanConfig()
    center = g.center_of(40, 40)
    field_ = human_cost_field(g, [PersonState(center, [1.0, 0.0])], cfg)
    ahead = _field_at(g, field_, center + np.array([1.0, 0.0]))
    behind = _field_at(g, field_, center + np.array([-1.0, 0.0]))
    assert ahead > behind * 5


def test_walker_cost_is_heavier_on_the_right():
    """Facing +x, the left side is +y; the right side carries a wider,
    costlier lobe, which is what pushes overtakes to the left."""
    g = OccupancyGrid.empty(81, 81, 0.1)
    cfg = HanConfig()
    center = g.center_of(40, 40)
    field_ = human_cost_field(g, [PersonState(center, [1.0, 0.0])], cfg)
    left = _field_at(g, field_, center + np.array([0.0, 0.8]))
    right = _field_at(g, field_, center + np.array([0.0, -0.8]))
    assert right > left


def test_slow_drift_counts_as_standing():
    g = OccupancyGrid.empty(41, 41, 0.1)
    cfg = HanConfig(moving_threshold=0.1)
    center = g.center_of(20, 20)
    still = human_cost_field(g, [PersonState(center, [0.0, 0.0])], cfg)
    drift = human_cost_field(g, [PersonState(center, [0.05, 0.0])], cfg)
    assert np.array_equal(still, drift)


def test_cost_field_combines_people_by_max():
    g = OccupancyGrid.empty(41, 41, 0.25)
    cfg = HanConfig()
    a = PersonState(g.center_of(10, 20), [0.0, 0.0])
    b = PersonState(g.center_of(30, 20), [0.0, 0.0])
    fa = human_cost_field(g, [a], cfg)
    fb = human_cost_field(g, [b], cfg)
    both = human_cost_field(g, [a, b], cfg)
    assert np.array_equal(both, np.maximum(fa, fb))


def test_costmap_validation():
    g = OccupancyGrid.empty(4, 4, 1.0)
    with pytest.raises(ValueError):
        CostMap(g, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        CostMap(g, -np.ones((4, 4)))
    occ = OccupancyGrid.empty(2, 2, 1.0)
    occ.occupied[0, 1] = True
    cm = CostMap(occ, np.zeros((2, 2)))
    assert np.isinf(cm.total[0, 1])
    assert cm.total[0, 0] == 0.0


# ---------------------------------------------------------------- planning


def _dijkstra_cost(costmap, start, goal):
    """Reference optimum with no heuristic, same edge model as the planner."""
    grid = costmap.grid
    total = costmap.total
    res = grid.resolution
    sx, sy = grid.cell_of(start)
    gx, gy = grid.cell_of(goal)
    start_idx = sy * grid.width + sx
    goal_idx = gy * grid.width + gx
    dist = {start_idx: 0.0}
    heap = [(0.0, start_idx)]
    done = set()
    steps = [
        (dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)
    ]
    while heap:
        d, idx = heapq.heappop(heap)
        if idx in done:
            continue
        done.add(idx)
        if idx == goal_idx:
            return d
        iy, ix = divmod(idx, grid.width)
        for dx, dy in steps:
            nx, ny = ix + dx, iy + dy
            if not grid.in_bounds(nx, ny):
                continue
            cell = total[ny, nx]
            if not np.isfinite(cell):
                continue
            step = res * (np.sqrt(2.0) if dx and dy else 1.0)
            nd = d + step * (1.0 + cell)
            nidx = ny * grid.width + nx
            if nd < dist.get(nidx, np.inf):
                dist[nidx] = nd
                heapq.heappush(heap, (nd, nidx))
    return float("inf")


def test_straight_line_on_free_grid():
    g = OccupancyGrid.empty(10, 5, 0.5)
    cm = CostMap(g, np.zeros((5, 10)))
    res = plan_astar(cm, g.center_of(0, 2), g.center_of(9, 2))
    assert res.found
    assert res.cells[0] == (0, 2) and res.cells[-1] == (9, 2)
    assert len(res.cells) == 10
    assert res.cost == pytest.approx(9 * 0.5)


def test_diagonal_moves_cost_sqrt2():
    g = OccupancyGrid.empty(6, 6, 1.0)
    cm = CostMap(g, np.zeros((6, 6)))
    res = plan_astar(cm, g.center_of(0, 0), g.center_of(5, 5))
    assert res.found
    assert res.cost == pytest.approx(5 * np.sqrt(2.0))


def test_planner_detours_around_walls():
    g = OccupancyGrid.empty(9, 9, 1.0)
    g.occupied[1:9, 4] = True  # wall with a gap at the top row
    cm = CostMap(g, np.zeros((9, 9)))
    res = plan_astar(cm, g.center_of(0, 8), g.center_of(8, 8))
    assert res.found
    assert any(iy == 0 for _, iy in res.cells)
    assert all(not g.occupied[iy, ix] for ix, iy in res.cells)


def test_unreachable_goal_reports_not_found():
    g = OccupancyGrid.empty(7, 7, 1.0)
    g.occupied[:, 3] = True  # full wall
    cm = CostMap(g, np.zeros((7, 7)))
    res = plan_astar(cm, g.center_of(0, 3), g.center_of(6, 3))
    assert not res.found
    assert res.cost == float("inf")


def test_start_goal_validation():
    g = OccupancyGrid.empty(5, 5, 1.0)
    g.occupied[2, 2] = True
    cm = CostMap(g, np.zeros((5, 5)))
    with pytest.raises(ValueError, match="outside"):
        plan_astar(cm, (-3.0, 0.5), g.center_of(4, 4))
    with pytest.raises(ValueError, match="occupied"):
        plan_astar(cm, g.center_of(2, 2), g.center_of(4, 4))


def test_astar_matches_dijkstra_on_random_fields():
    rng = np.random.default_rng(0)
    for _ in range(25):
        g = OccupancyGrid.empty(12, 12, 0.5)
        g.occupied = rng.random((12, 12)) < 0.2
        g.occupied[0, 0] = False
        g.occupied[11, 11] = False
        cm = CostMap(g, rng.random((12, 12)) * 4.0)
        res = plan_astar(cm, g.center_of(0, 0), g.center_of(11, 11))
        want = _dijkstra_cost(cm, g.center_of(0, 0), g.center_of(11, 11))
        if not res.found:
            assert want == float("inf")
        else:
            assert res.cost == want


def test_path_cost_reproduces_planner_cost():
    rng = np.random.default_rng(1)
    g = OccupancyGrid.empty(10, 10, 0.5)
    cm = CostMap(g, rng.random((10, 10)) * 3.0)
    res = plan_astar(cm, g.center_of(0, 0), g.center_of(9, 4))
    assert res.found
    assert path_cost(cm, res.cells) == res.cost


def test_path_cost_rejects_broken_sequences():
    g = OccupancyGrid.empty(6, 6, 1.0)
    g.occupied[0, 3] = True
    cm = CostMap(g, np.zeros((6, 6)))
    assert path_cost(cm, []) == float("inf")
    assert path_cost(cm, [(0, 0), (2, 0)]) == float("inf")  # skipped a cell
    assert path_cost(cm, [(0, 0), (0, 0)]) == float("inf")  # no move
    assert path_cost(cm, [(2, 0), (3, 0)]) == float("inf")  # steps into a wall
    assert path_cost(cm, [(3, 0), (2, 0)]) == float("inf")  # starts in a wall


def test_plan_is_deterministic():
    rng = np.random.default_rng(2)
    g = OccupancyGrid.empty(15, 15, 0.5)
    cm = CostMap(g, rng.random((15, 15)))
    a = plan_astar(cm, g.center_of(0, 0), g.center_of(14, 14))
    b = plan_astar(cm, g.center_of(0, 0), g.center_of(14, 14))
    assert a.cells == b.cells
    assert a.cost == b.cost


# -------------------------------------------------------------- replanning


def _corridor():
    g = OccupancyGrid.empty(20, 10, 0.5)  # 10 x 5 meters
    start = g.center_of(1, 4)
    goal = g.center_of(18, 4)
    return g, start, goal


def test_replanner_reuses_until_people_move():
    g, start, goal = _corridor()
    rp = Replanner()
    person = PersonState([5.0, 2.25], [0.0, 0.0])
    first = rp.step(g, [person], start, goal)
    assert first.found and rp.plans_computed == 1
    again = rp.step(g, [person], start, goal)
    assert rp.plans_computed == 1
    assert again.cells == first.cells
    # a sub-threshold drift still reuses
    drifted = PersonState([5.0 + 0.1, 2.25], [0.0, 0.0])
    rp.step(g, [drifted], start, goal)
    assert rp.plans_computed == 1


def test_replanner_trims_to_the_robot_cell():
    g, start, goal = _corridor()
    rp = Replanner()
    person = PersonState([5.0, 2.25], [0.0, 0.0])
    first = rp.step(g, [person], start, goal)
    ahead = first.waypoints[3]
    moved = rp.step(g, [person], ahead, goal)
    assert rp.plans_computed == 1
    assert moved.cells == first.cells[3:]
    assert g.cell_of(moved.waypoints[0]) == g.cell_of(ahead)


def test_replanner_triggers_on_position_velocity_count_and_goal():
    g, start, goal = _corridor()
    rp = Replanner(cfg=ReplanConfig(position_delta=0.2, velocity_delta=0.1))
    rp.step(g, [PersonState([5.0, 2.25], [0.0, 0.0])], start, goal)
    rp.step(g, [PersonState([5.3, 2.25], [0.0, 0.0])], start, goal)
    assert rp.plans_computed == 2
    rp.step(g, [PersonState([5.3, 2.25], [0.5, 0.0])], start, goal)
    assert rp.plans_computed == 3
    rp.step(g, [], start, goal)
    assert rp.plans_computed == 4
    rp.step(g, [], start, g.center_of(18, 1))
    assert rp.plans_computed == 5


def test_replanner_holds_course_against_marginal_alternatives():
    """A triggered replan whose fresh path is not clearly cheaper must not
    displace the committed route."""
    g, start, goal = _corridor()
    rp = Replanner()
    person = PersonState([5.0, 1.9], [0.0, 0.0])
    first = rp.step(g, [person], start, goal)
    # the person steps away from the route; costs change, the route should not
    stepped = PersonState([5.0, 1.6], [0.0, 0.0])
    second = rp.step(g, [stepped], start, goal)
    assert rp.plans_computed == 2
    assert second.cells == first.cells


def test_replanner_switches_when_the_route_is_blocked():
    g, start, goal = _corridor()
    rp = Replanner()
    person = PersonState([5.0, 1.4], [0.0, 0.0])
    first = rp.step(g, [person], start, goal)
    # the person walks onto the committed route
    on_route = first.waypoints[len(first.waypoints) // 2]
    blocking = PersonState(on_route, [0.0, 0.0])
    second = rp.step(g, [blocking], start, goal)
    assert rp.plans_computed == 2
    assert second.cells != first.cells


# -------------------------------------------------------------------- csv


def test_path_csv_round_trip(tmp_path):
    pts = [np.array([0.25, 0.75]), np.array([1.0, 2.0]), np.array([-3.5, 4.125])]
    f = tmp_path / "path.csv"
    write_path_csv(f, pts)
    back = read_path_csv(f)
    assert len(back) == 3
    for a, b in zip(pts, back):
        assert np.allclose(a, b, atol=1e-6)
    assert f.read_text().splitlines()[0] == "x,y"
