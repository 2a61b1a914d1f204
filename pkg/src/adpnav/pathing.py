"""Grid A* on the robot-radius-inflated map, and the lookahead local goal."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConnectivityFailure
from .world import DEFAULT_ROBOT_RADIUS, OccupancyWorld, clearance_mask

SQRT2 = math.sqrt(2.0)
_MOVES = [
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
]


def inflate(world: OccupancyWorld, radius: float = DEFAULT_ROBOT_RADIUS) -> np.ndarray:
    """Traversable mask: free cells whose centre clears ``radius``."""
    return clearance_mask(world.cells, world.resolution, radius)


def _octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dr, dc) + (SQRT2 - 1.0) * min(dr, dc)


def astar(free: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> tuple[list[tuple[int, int]], float]:
    """8-connected A* in cell units; diagonal moves may not cut corners.

    Returns (cells, length) or raises ConnectivityFailure.
    """
    h, w = free.shape
    if not (free[start] and free[goal]):
        raise ConnectivityFailure("start or goal cell is not traversable")
    g = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    heap = [(_octile(start, goal), 0, start)]
    tie = 0
    closed = set()
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while path[-1] in parent:
                path.append(parent[path[-1]])
            return path[::-1], g[goal]
        closed.add(cur)
        r, c = cur
        for dr, dc, cost in _MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or not free[nr, nc]:
                continue
            if dr and dc and not (free[r + dr, c] and free[r, c + dc]):
                continue
            ng = g[cur] + cost
            nxt = (nr, nc)
            if ng < g.get(nxt, math.inf):
                g[nxt] = ng
                parent[nxt] = cur
                tie += 1
                heapq.heappush(heap, (ng + _octile(nxt, goal), tie, nxt))
    raise ConnectivityFailure(f"no path from {start} to {goal}")


def nearest_free(free: np.ndarray, cell: tuple[int, int]) -> tuple[int, int]:
    """Closest traversable cell by breadth-first search (ties in scan order)."""
    h, w = free.shape
    r0 = min(max(cell[0], 0), h - 1)
    c0 = min(max(cell[1], 0), w - 1)
    if free[r0, c0]:
        return r0, c0
    seen = {(r0, c0)}
    queue = deque([(r0, c0)])
    while queue:
        r, c = queue.popleft()
        for dr, dc, _ in _MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and (nr, nc) not in seen:
                if free[nr, nc]:
                    return nr, nc
                seen.add((nr, nc))
                queue.append((nr, nc))
    raise ConnectivityFailure("map has no traversable cell")


@dataclass
class LocalGoal:
    x: float
    y: float
    terminal: bool  # True when this is the global goal itself


class GlobalPlanner:
    """Re-plans A* from the robot's cell every query; results are memoised per cell."""

    def __init__(self, world: OccupancyWorld, radius: float = DEFAULT_ROBOT_RADIUS,
                 lookahead: float = 2.0) -> None:
        self.world = world
        self.free = inflate(world, radius)
        self.lookahead = lookahead
        self.goal_cell = nearest_free(self.free, world.cell_of(*world.goal))
        self._cache: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def path_from(self, x: float, y: float) -> list[tuple[int, int]]:
        cell = nearest_free(self.free, self.world.cell_of(x, y))
        path = self._cache.get(cell)
        if path is None:
            path, _ = astar(self.free, cell, self.goal_cell)
            self._cache[cell] = path
        return path

    def local_goal(self, x: float, y: float) -> LocalGoal:
        path = self.path_from(x, y)
        gx, gy = self.world.goal
        pts = [self.world.cell_center(r, c) for r, c in path[1:-1]] + [(gx, gy)]
        travelled = 0.0
        px, py = x, y
        best = None
        for i, (qx, qy) in enumerate(pts):
            travelled += math.hypot(qx - px, qy - py)
            if travelled > self.lookahead and best is not None:
                return LocalGoal(best[0], best[1], False)
            best = (qx, qy)
            px, py = qx, qy
            if travelled > self.lookahead:
                return LocalGoal(qx, qy, i == len(pts) - 1)
        return LocalGoal(gx, gy, True)


def shortest_path_length(world: OccupancyWorld, radius: float = DEFAULT_ROBOT_RADIUS) -> float:
    """Metres along the 8-connected inflated-grid shortest path from start to goal."""
    free = inflate(world, radius)
    s = world.cell_of(*world.start[:2])
    g = world.cell_of(*world.goal)
    if not (0 <= s[0] < free.shape[0] and 0 <= s[1] < free.shape[1] and free[s]):
        raise ConnectivityFailure("start cell is not traversable")
    if not (0 <= g[0] < free.shape[0] and 0 <= g[1] < free.shape[1] and free[g]):
        raise ConnectivityFailure("goal cell is not traversable")
    _, length = astar(free, s, g)
    return length * world.resolution
