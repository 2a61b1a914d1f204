"""Occupancy-grid worlds: cave generation, collision queries and a 2D LiDAR.

Grid convention: ``cells[i, j]`` covers x in [j*res, (j+1)*res) and
y in [i*res, (i+1)*res); row 0 is the minimum-y row; True means occupied.
Anything outside the grid is treated as occupied.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import ConnectivityFailure, InvalidParams
from .prng import SplitMix64

LIDAR_BEAMS = 720
LIDAR_FOV_DEG = 270.0
DEFAULT_MAX_RANGE = 10.0
DEFAULT_ROBOT_RADIUS = 0.3
MAX_REGEN_ATTEMPTS = 50


@dataclass(frozen=True)
class CAParams:
    """Cellular-automata cave parameters."""

    fill_prob: float = 0.45
    smoothing_iters: int = 4
    birth_limit: int = 5
    death_limit: int = 4


@dataclass(frozen=True, eq=False)
class OccupancyWorld:
    cells: np.ndarray
    resolution: float
    start: tuple[float, float, float]
    goal: tuple[float, float]
    seed: int = 0

    def __post_init__(self) -> None:
        cells = np.array(self.cells, dtype=bool, copy=True)
        if cells.ndim != 2:
            raise InvalidParams("cells must be a 2D array")
        if not self.resolution > 0:
            raise InvalidParams("resolution must be positive")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))

    @property
    def height_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def width_cells(self) -> int:
        return self.cells.shape[1]

    @property
    def width_m(self) -> float:
        return self.width_cells * self.resolution

    @property
    def height_m(self) -> float:
        return self.height_cells * self.resolution

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) index of the cell containing a world point."""
        return int(math.floor(y / self.resolution)), int(math.floor(x / self.resolution))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return ((col + 0.5) * self.resolution, (row + 0.5) * self.resolution)

    def occupied(self, row: int, col: int) -> bool:
        if 0 <= row < self.height_cells and 0 <= col < self.width_cells:
            return bool(self.cells[row, col])
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OccupancyWorld):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.start == other.start
            and self.goal == other.goal
            and self.seed == other.seed
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class LidarScan:
    ranges: np.ndarray
    max_range: float
    frame_pose: tuple[float, float, float]
    fov_deg: float = LIDAR_FOV_DEG

    @property
    def bearings(self) -> np.ndarray:
        return beam_bearings(len(self.ranges), self.fov_deg)


def beam_bearings(n: int = LIDAR_BEAMS, fov_deg: float = LIDAR_FOV_DEG) -> np.ndarray:
    """Beam angles relative to heading; beam 0 at -fov/2, beam n-1 at +fov/2."""
    half = math.radians(fov_deg) / 2.0
    if n == 1:
        return np.zeros(1)
    return -half + np.arange(n) * (2.0 * half / (n - 1))


# ----------------------------------------------------------------------------
# generation
# ----------------------------------------------------------------------------


def _ca_grid(rng: SplitMix64, width: int, height: int, ca: CAParams) -> np.ndarray:
    cells = np.ones((height, width), dtype=bool)
    interior = np.zeros((height - 2, width - 2), dtype=bool)
    for i in range(height - 2):
        for j in range(width - 2):
            interior[i, j] = rng.random() < ca.fill_prob
    # The wall ring is not counted as a neighbour, so an empty interior stays empty.
    kernel = np.ones((3, 3), dtype=np.int32)
    kernel[1, 1] = 0
    for _ in range(ca.smoothing_iters):
        counts = ndimage.convolve(interior.astype(np.int32), kernel, mode="constant", cval=0)
        nxt = interior.copy()
        nxt[counts >= ca.birth_limit] = True
        nxt[counts < ca.death_limit] = False
        interior = nxt
    cells[1:-1, 1:-1] = interior
    return cells


def clearance_mask(cells: np.ndarray, resolution: float, radius: float) -> np.ndarray:
    """Cells whose centre is at least ``radius`` from every occupied cell."""
    h, w = cells.shape
    probe = OccupancyWorld(cells, resolution, (0.0, 0.0, 0.0), (0.0, 0.0))
    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    xs = (cols.ravel() + 0.5) * resolution
    ys = (rows.ravel() + 0.5) * resolution
    if radius <= 0:
        return ~cells
    d = obstacle_distance(probe, xs, ys, cap=radius + resolution)
    return (d >= radius).reshape(h, w) & ~cells


def _pick_in_row(component: np.ndarray, row: int) -> tuple[int, int]:
    cols = np.flatnonzero(component[row])
    centre = (component.shape[1] - 1) / 2.0
    best = min(cols, key=lambda c: (abs(c - centre), c))
    return row, int(best)


def place_start_goal(
    cells: np.ndarray, radius_cells: float
) -> tuple[tuple[int, int], tuple[int, int]] | None:
    """Start on the lowest and goal on the highest row of the largest clear component.

    ``radius_cells`` is the robot radius in cell units. Returns None when the
    component spans less than half the grid height.
    """
    h = cells.shape[0]
    clear = clearance_mask(cells, 1.0, radius_cells)
    labels, n = ndimage.label(clear)  # 4-connectivity
    if n == 0:
        return None
    sizes = np.bincount(labels.ravel())[1:]
    comp = labels == (int(np.argmax(sizes)) + 1)
    rows = np.flatnonzero(comp.any(axis=1))
    lo, hi = int(rows[0]), int(rows[-1])
    if hi - lo < h // 2:
        return None
    return _pick_in_row(comp, lo), _pick_in_row(comp, hi)


def generate_world(
    seed: int,
    width: int = 30,
    height: int = 30,
    resolution: float = 0.15,
    ca_params: CAParams | None = None,
    robot_radius: float = DEFAULT_ROBOT_RADIUS,
) -> OccupancyWorld:
    """Generate a walled cave world with start near the bottom and goal near the top.

    Start and goal are placed in the largest 4-connected component of cells
    whose centres clear ``robot_radius``. If no such component spans at least
    half the height, the generator retries with ``seed + i`` for up to 50
    extra attempts. The emitted ``seed`` is the one that succeeded.
    """
    ca = ca_params or CAParams()
    if width < 10 or height < 10:
        raise InvalidParams("width and height must be at least 10 cells")
    if not 0.0 <= ca.fill_prob < 1.0:
        raise InvalidParams("fill_prob must lie in [0, 1)")
    if resolution <= 0:
        raise InvalidParams("resolution must be positive")
    for attempt in range(MAX_REGEN_ATTEMPTS + 1):
        eff_seed = (int(seed) + attempt) & ((1 << 64) - 1)
        cells = _ca_grid(SplitMix64(eff_seed), width, height, ca)
        ends = place_start_goal(cells, robot_radius / resolution)
        if ends is None:
            continue
        (sr, sc), (gr, gc) = ends
        sx, sy = (sc + 0.5) * resolution, (sr + 0.5) * resolution
        goal = ((gc + 0.5) * resolution, (gr + 0.5) * resolution)
        world = OccupancyWorld(cells, resolution, (sx, sy, math.pi / 2), goal, eff_seed)
        return OccupancyWorld(cells, resolution, (sx, sy, _initial_yaw(world, robot_radius)), goal, eff_seed)
    raise ConnectivityFailure(
        f"no connected world for seed {seed} after {MAX_REGEN_ATTEMPTS} retries"
    )


def generate_worlds(seed: int, count: int, **kwargs) -> list[OccupancyWorld]:
    """``count`` distinct worlds; each one starts from the previous effective seed + 1."""
    worlds = []
    s = int(seed)
    for _ in range(count):
        w = generate_world(s, **kwargs)
        worlds.append(w)
        s = w.seed + 1
    return worlds


def _initial_yaw(world: OccupancyWorld, robot_radius: float) -> float:
    """Bearing from the start to the 2 m lookahead point on the grid path."""
    from .pathing import GlobalPlanner  # pathing imports this module

    sx, sy, _ = world.start
    lg = GlobalPlanner(world, robot_radius).local_goal(sx, sy)
    return math.atan2(lg.y - sy, lg.x - sx)


def empty_world(
    width_m: float = 10.0,
    height_m: float = 10.0,
    resolution: float = 0.1,
    start: tuple[float, float, float] | None = None,
    goal: tuple[float, float] | None = None,
    obstacles: Iterable[tuple[int, int]] = (),
) -> OccupancyWorld:
    """Walled rectangle with optional occupied cells given as (row, col)."""
    w = int(round(width_m / resolution))
    h = int(round(height_m / resolution))
    cells = np.zeros((h, w), dtype=bool)
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True
    for r, c in obstacles:
        cells[r, c] = True
    if start is None:
        start = (width_m / 2, 2.0, math.pi / 2)
    if goal is None:
        goal = (width_m / 2, height_m - 2.0)
    return OccupancyWorld(cells, resolution, start, goal)


# ----------------------------------------------------------------------------
# queries
# ----------------------------------------------------------------------------


@njit(cache=True)
def _min_dist_kernel(cells, res, xs, ys, cap, out):
    h, w = cells.shape
    k = int(math.ceil(cap / res)) + 1
    for n in range(xs.size):
        x, y = xs[n], ys[n]
        if not (x >= 0.0 and y >= 0.0 and x < w * res and y < h * res):
            out[n] = 0.0
            continue
        ci = int(math.floor(y / res))
        cj = int(math.floor(x / res))
        best2 = cap * cap
        for di in range(-k, k + 1):
            r = ci + di
            y0 = r * res
            dy = max(y0 - y, y - (y0 + res), 0.0)
            if dy * dy >= best2:
                continue
            for dj in range(-k, k + 1):
                c = cj + dj
                if 0 <= r < h and 0 <= c < w and not cells[r, c]:
                    continue
                x0 = c * res
                dx = max(x0 - x, x - (x0 + res), 0.0)
                d2 = dx * dx + dy * dy
                if d2 < best2:
                    best2 = d2
        out[n] = math.sqrt(best2)


def obstacle_distance(world: OccupancyWorld, xs, ys, cap: float) -> np.ndarray:
    """Exact distance from each point to the nearest occupied cell, saturated at ``cap``.

    Points outside the grid get distance 0.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    shape = np.broadcast(xs, ys).shape
    fx = np.ascontiguousarray(np.broadcast_to(xs, shape)).ravel()
    fy = np.ascontiguousarray(np.broadcast_to(ys, shape)).ravel()
    out = np.empty(fx.size)
    _min_dist_kernel(world.cells, float(world.resolution), fx, fy, float(cap), out)
    return out.reshape(shape)


def collides(world: OccupancyWorld, xs, ys, robot_radius: float) -> np.ndarray:
    """Vectorised disc collision test; see :func:`is_collision`."""
    cap = robot_radius + world.resolution
    return obstacle_distance(world, xs, ys, cap) <= robot_radius


def is_collision(world: OccupancyWorld, state, robot_radius: float = DEFAULT_ROBOT_RADIUS) -> bool:
    """True when a disc of ``robot_radius`` at (state.x, state.y) touches an occupied cell."""
    if robot_radius < 0:
        raise InvalidParams("robot_radius must be non-negative")
    return bool(collides(world, state.x, state.y, robot_radius))


def cast_lidar(
    world: OccupancyWorld,
    pose,
    max_range: float = DEFAULT_MAX_RANGE,
    n_beams: int = LIDAR_BEAMS,
    fov_deg: float = LIDAR_FOV_DEG,
) -> LidarScan:
    """Cast a planar scan by exact grid traversal (Amanatides-Woo DDA).

    Each beam reports the distance at which it enters its first occupied
    cell, clamped to ``max_range``.
    """
    x, y, yaw = float(pose.x), float(pose.y), float(pose.yaw)
    angles = yaw + beam_bearings(n_beams, fov_deg)
    ranges = np.empty(n_beams)
    _dda_kernel(world.cells, float(world.resolution), x, y, angles, float(max_range), ranges)
    return LidarScan(ranges, float(max_range), (x, y, yaw), fov_deg)


@njit(cache=True)
def _dda_kernel(cells, res, x, y, angles, max_range, out):
    h, w = cells.shape
    i0 = int(math.floor(y / res))
    j0 = int(math.floor(x / res))
    start_blocked = not (0 <= i0 < h and 0 <= j0 < w) or cells[i0, j0]
    for b in range(angles.size):
        if start_blocked:
            out[b] = 1e-9
            continue
        dx = math.cos(angles[b])
        dy = math.sin(angles[b])
        i, j = i0, j0
        step_x = 1 if dx > 0 else -1
        step_y = 1 if dy > 0 else -1
        t_dx = res / abs(dx) if dx != 0.0 else math.inf
        t_dy = res / abs(dy) if dy != 0.0 else math.inf
        if dx > 0:
            t_mx = ((j + 1) * res - x) / dx
        elif dx < 0:
            t_mx = (j * res - x) / dx
        else:
            t_mx = math.inf
        if dy > 0:
            t_my = ((i + 1) * res - y) / dy
        elif dy < 0:
            t_my = (i * res - y) / dy
        else:
            t_my = math.inf
        dist = max_range
        while True:
            if t_mx <= t_my:
                t = t_mx
                j += step_x
                t_mx += t_dx
            else:
                t = t_my
                i += step_y
                t_my += t_dy
            if t >= max_range:
                break
            if not (0 <= i < h and 0 <= j < w) or cells[i, j]:
                dist = t
                break
        out[b] = min(max(dist, 1e-9), max_range)


def k_nearest_obstacle_distances(scan: LidarScan, k: int = 10) -> np.ndarray:
    ranges = np.asarray(scan.ranges)
    if k > ranges.size:
        raise InvalidParams("k exceeds number of beams")
    if k <= 0:
        return np.empty(0)
    return np.sort(np.partition(ranges, k - 1)[:k])


def bfs_connected(cells: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> bool:
    """4-connected breadth-first search over free cells."""
    h, w = cells.shape
    if cells[start] or cells[goal]:
        return False
    seen = np.zeros_like(cells, dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        if (r, c) == goal:
            return True
        for nr, nc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if 0 <= nr < h and 0 <= nc < w and not cells[nr, nc] and not seen[nr, nc]:
                seen[nr, nc] = True
                queue.append((nr, nc))
    return False


# ----------------------------------------------------------------------------
# text format
# ----------------------------------------------------------------------------

WORLD_MAGIC = "ADPWORLD 1"


def dumps_world(world: OccupancyWorld) -> str:
    lines = [
        WORLD_MAGIC,
        f"{world.width_cells} {world.height_cells} {world.resolution!r} {world.seed}",
        " ".join(repr(v) for v in (*world.start, *world.goal)),
    ]
    for row in world.cells:
        lines.append("".join("#" if c else "." for c in row))
    return "\n".join(lines) + "\n"


def loads_world(text: str) -> OccupancyWorld:
    lines = text.splitlines()
    if not lines or lines[0].strip() != WORLD_MAGIC:
        raise InvalidParams("not an ADPWORLD 1 file")
    w_s, h_s, res_s, seed_s = lines[1].split()
    width, height = int(w_s), int(h_s)
    sx, sy, syaw, gx, gy = (float(v) for v in lines[2].split())
    rows = lines[3 : 3 + height]
    if len(rows) != height or any(len(r) != width for r in rows):
        raise InvalidParams("grid rows do not match the declared size")
    cells = np.array([[ch == "#" for ch in r] for r in rows], dtype=bool)
    return OccupancyWorld(cells, float(res_s), (sx, sy, syaw), (gx, gy), int(seed_s))


def save_world(world: OccupancyWorld, path: str | Path) -> None:
    Path(path).write_text(dumps_world(world))


def load_world(path: str | Path) -> OccupancyWorld:
    return loads_world(Path(path).read_text())


def load_worlds(paths: Sequence[str | Path]) -> list[OccupancyWorld]:
    return [load_world(p) for p in paths]
