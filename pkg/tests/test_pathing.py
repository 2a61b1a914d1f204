import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adpnav.errors import ConnectivityFailure
from adpnav.pathing import GlobalPlanner, astar, inflate, nearest_free, shortest_path_length
from adpnav.world import OccupancyWorld, empty_world, obstacle_distance
from oracles import grid_shortest


def test_open_grid_is_octile_distance():
    free = np.ones((20, 20), dtype=bool)
    path, length = astar(free, (2, 3), (12, 7))
    assert length == pytest.approx(6 + 4 * math.sqrt(2))
    assert path[0] == (2, 3) and path[-1] == (12, 7)
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        assert max(abs(r1 - r0), abs(c1 - c0)) == 1


def test_no_corner_cutting():
    free = np.ones((3, 3), dtype=bool)
    free[0, 1] = free[1, 0] = False
    # (0,0) is only reachable diagonally through a pinched corner
    with pytest.raises(ConnectivityFailure):
        astar(free, (0, 0), (2, 2))


def test_blocked_raises():
    free = np.ones((10, 10), dtype=bool)
    free[:, 5] = False
    with pytest.raises(ConnectivityFailure):
        astar(free, (0, 0), (0, 9))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_astar_matches_exhaustive_relaxation(seed):
    rng = np.random.default_rng(seed)
    free = rng.random((8, 9)) > 0.3
    free[0, 0] = free[7, 8] = True
    ref = grid_shortest(free, (0, 0), (7, 8))
    if math.isinf(ref):
        with pytest.raises(ConnectivityFailure):
            astar(free, (0, 0), (7, 8))
    else:
        _, length = astar(free, (0, 0), (7, 8))
        assert length == pytest.approx(ref, abs=1e-9)


def test_inflate_keeps_only_clear_cell_centres():
    w = empty_world(obstacles=[(50, 50)])
    free = inflate(w, 0.3)
    rows, cols = np.indices(free.shape)
    xs, ys = (cols + 0.5) * w.resolution, (rows + 0.5) * w.resolution
    d = obstacle_distance(w, xs.ravel(), ys.ravel(), 1.0).reshape(free.shape)
    assert np.array_equal(free, (d >= 0.3) & ~w.cells)


def test_nearest_free():
    free = np.zeros((5, 5), dtype=bool)
    free[4, 4] = True
    assert nearest_free(free, (0, 0)) == (4, 4)
    assert nearest_free(free, (4, 4)) == (4, 4)
    with pytest.raises(ConnectivityFailure):
        nearest_free(np.zeros((3, 3), dtype=bool), (1, 1))


def test_shortest_path_length_empty_world():
    w = empty_world()
    assert shortest_path_length(w) == pytest.approx(6.0)
    # optimal time at the velocity cap
    assert shortest_path_length(w) / 1.5 == pytest.approx(4.0)


def test_local_goal_lookahead():
    w = empty_world()
    gp = GlobalPlanner(w, lookahead=2.0)
    lg = gp.local_goal(5.0, 2.0)
    assert not lg.terminal
    assert lg.x == pytest.approx(5.05, abs=0.1)
    # furthest path point not beyond the lookahead
    assert 2.0 - 0.1 * math.sqrt(2) <= math.hypot(lg.x - 5.0, lg.y - 2.0) <= 2.0
    near = gp.local_goal(5.0, 7.0)
    assert near.terminal and (near.x, near.y) == w.goal


def test_local_goal_follows_detour():
    cells = np.zeros((60, 60), dtype=bool)
    cells[30, :45] = True  # wall with a gap on the right
    w = OccupancyWorld(cells, 0.1, (1.0, 1.0, 0.0), (1.0, 5.0))
    lg = GlobalPlanner(w, lookahead=2.0).local_goal(1.0, 1.0)
    # heads right toward the gap rather than straight up at the goal
    assert lg.x > 2.0
