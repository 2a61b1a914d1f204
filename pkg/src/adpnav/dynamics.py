"""Differential-drive kinematics with exact constant-twist integration.

The arc update is written in the half-angle form

    x' = x + v*dt * sinc(w*dt/2) * cos(yaw + w*dt/2)
    y' = y + v*dt * sinc(w*dt/2) * sin(yaw + w*dt/2)

which equals the textbook (v/w)(sin(yaw + w dt) - sin yaw) expression but
stays well conditioned as w -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidParams, NonPositiveDt
from .world import DEFAULT_ROBOT_RADIUS, OccupancyWorld, collides

EPS_W = 1e-6


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    w = np.where(w <= -math.pi, w + 2.0 * math.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    yaw: float
    v: float = 0.0
    w: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.yaw)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw, self.v, self.w])


@dataclass(frozen=True)
class Control:
    v_cmd: float
    w_cmd: float


@dataclass(frozen=True)
class VelocityLimits:
    v_max: float = 1.5
    w_max: float = 1.57
    a_v: float = 2.0
    a_w: float = 3.0

    def __post_init__(self) -> None:
        if min(self.v_max, self.w_max, self.a_v, self.a_w) <= 0:
            raise InvalidParams("velocity limits must be positive")

    def clamp(self, u: Control, allow_reverse: bool = False) -> Control:
        v_lo = -self.v_max if allow_reverse else 0.0
        return Control(
            float(np.clip(u.v_cmd, v_lo, self.v_max)),
            float(np.clip(u.w_cmd, -self.w_max, self.w_max)),
        )


def arc_displacement(yaw, v, w, dt):
    """Displacement (dx, dy, dyaw) of a constant-twist arc; broadcasts over arrays."""
    half = 0.5 * np.asarray(w) * dt
    # np.sinc is sin(pi x)/(pi x); below EPS_W the arc is a straight line
    straight = np.abs(w) < EPS_W
    s = np.where(straight, 1.0, np.sinc(half / math.pi))
    heading = np.where(straight, yaw, yaw + half)
    dist = np.asarray(v) * dt * s
    dyaw = np.where(straight, 0.0, np.asarray(w) * dt)
    return dist * np.cos(heading), dist * np.sin(heading), dyaw


def step(state: RobotState, u: Control, dt: float) -> RobotState:
    """Advance ``state`` by ``dt`` seconds under constant command ``u``."""
    if not dt > 0:
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    dx, dy, dyaw = arc_displacement(state.yaw, u.v_cmd, u.w_cmd, dt)
    return RobotState(
        state.x + float(dx),
        state.y + float(dy),
        state.yaw + float(dyaw),
        u.v_cmd,
        u.w_cmd,
    )


def subcheck_counts(v, intervals, radius: float) -> np.ndarray:
    """Collision checks per interval so consecutive checked states are <= radius apart."""
    travel = np.abs(np.asarray(v, dtype=float)) * np.asarray(intervals, dtype=float)
    if radius <= 0:
        return np.ones_like(travel, dtype=np.int64)
    return np.maximum(1, np.ceil(travel / radius - 1e-12)).astype(np.int64)


@dataclass
class RolloutBatch:
    """Rollouts of K control sequences over one schedule.

    ``states`` has shape (K, N+1, 3) holding (x, y, yaw) at every interval
    boundary, index 0 being the start. ``first_hit`` is the index of the first
    interval whose sub-checks touched an obstacle (N when collision-free).
    """

    states: np.ndarray
    v: np.ndarray
    w: np.ndarray
    collision: np.ndarray
    first_hit: np.ndarray


def rollout_batch(
    state: RobotState,
    v: np.ndarray,
    w: np.ndarray,
    intervals: Sequence[float],
    world: OccupancyWorld,
    radius: float = DEFAULT_ROBOT_RADIUS,
) -> RolloutBatch:
    """Vectorised rollout: ``v`` and ``w`` are (K, N) per-interval commands."""
    dts = np.asarray(intervals, dtype=float)
    if np.any(dts <= 0):
        raise NonPositiveDt("schedule intervals must be positive")
    v = np.atleast_2d(np.asarray(v, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    k, n = v.shape
    if n != dts.size or w.shape != v.shape:
        raise InvalidParams("control sequences must have one entry per interval")

    states = np.empty((k, n + 1, 3))
    states[:, 0] = (state.x, state.y, state.yaw)
    first_hit = np.full(k, n, dtype=np.int64)
    counts = subcheck_counts(v, dts[None, :], radius)
    x = np.full(k, state.x)
    y = np.full(k, state.y)
    yaw = np.full(k, state.yaw)
    for i in range(n):
        c = counts[:, i]
        m = int(c.max())
        # fractions j/c_k for j = 1..c_k; indices beyond c_k repeat the end state
        frac = np.minimum(np.arange(1, m + 1)[None, :] / c[:, None], 1.0)
        sub_dt = frac * dts[i]
        dx, dy, _ = arc_displacement(yaw[:, None], v[:, i, None], w[:, i, None], sub_dt)
        hit = collides(world, x[:, None] + dx, y[:, None] + dy, radius).any(axis=1)
        first_hit = np.where((first_hit == n) & hit, i, first_hit)
        ex, ey, eyaw = arc_displacement(yaw, v[:, i], w[:, i], dts[i])
        x, y, yaw = x + ex, y + ey, wrap_angle(yaw + eyaw)
        states[:, i + 1, 0] = x
        states[:, i + 1, 1] = y
        states[:, i + 1, 2] = yaw
    return RolloutBatch(states, v, w, first_hit < n, first_hit)


@dataclass
class Trajectory:
    states: list[RobotState]
    controls: list[Control]
    cost: float = 0.0
    collision: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def first_control(self) -> Control:
        return self.controls[0]


def rollout(
    state: RobotState,
    controls: Sequence[Control],
    schedule,
    world: OccupancyWorld,
    radius: float = DEFAULT_ROBOT_RADIUS,
) -> Trajectory:
    """Roll one control sequence over ``schedule``; states stop at the first collision."""
    intervals = np.asarray(getattr(schedule, "intervals", schedule), dtype=float)
    controls = list(controls)
    if len(controls) == 1 and intervals.size > 1:
        controls = controls * intervals.size
    if len(controls) != intervals.size:
        raise InvalidParams("need one control per schedule interval")
    v = np.array([[c.v_cmd for c in controls]])
    w = np.array([[c.w_cmd for c in controls]])
    batch = rollout_batch(state, v, w, intervals, world, radius)
    hit = int(batch.first_hit[0])
    out = [state]
    for i in range(hit):
        sx, sy, syaw = batch.states[0, i + 1]
        out.append(RobotState(float(sx), float(sy), float(syaw), controls[i].v_cmd, controls[i].w_cmd))
    return Trajectory(out, controls, collision=bool(batch.collision[0]))


def with_velocity(state: RobotState, u: Control) -> RobotState:
    return replace(state, v=u.v_cmd, w=u.w_cmd)
