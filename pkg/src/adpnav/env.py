"""The meta-environment: a policy picks a fidelity schedule, the planner drives.

One meta-step is one control period. The policy's raw action is decoded into
a schedule, the planner picks a velocity command under that schedule, and the
ground-truth simulator integrates the command for one control period at 1 ms
resolution. Planner fidelity only changes predictions, never the physics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .dynamics import Control, RobotState, arc_displacement, wrap_angle
from .errors import ConfigError, NoFeasibleTrajectory
from .pathing import GlobalPlanner
from .planners import Planner, PlannerConfig
from .schedule import (
    DDP_N,
    DDP_T,
    ActionBounds,
    FidelitySchedule,
    blended_schedule,
    decode_action,
    incremental_schedule,
    unconstrained_schedule,
)
from .world import (
    DEFAULT_MAX_RANGE,
    LIDAR_BEAMS,
    LidarScan,
    OccupancyWorld,
    cast_lidar,
    collides,
    k_nearest_obstacle_distances,
)

GOAL_INFO_DIMS = 4


# ----------------------------------------------------------------------------
# action spaces
# ----------------------------------------------------------------------------


class ActionSpace(Protocol):
    dim: int

    def schedule(self, raw: np.ndarray) -> FidelitySchedule: ...


@dataclass(frozen=True)
class BlendedActions:
    """(T, N, p, alpha) actions; ``reverse`` gives the incremental ablation."""

    bounds: ActionBounds = ActionBounds()
    reverse: bool = False
    dim: int = 4

    def schedule(self, raw: np.ndarray) -> FidelitySchedule:
        params = decode_action(raw, self.bounds)
        return incremental_schedule(params) if self.reverse else blended_schedule(params)


@dataclass(frozen=True)
class UnconstrainedActions:
    """One raw score per interval, softmax-normalised over a fixed horizon."""

    n: int = DDP_N
    T: float = DDP_T

    @property
    def dim(self) -> int:
        return self.n

    def schedule(self, raw: np.ndarray) -> FidelitySchedule:
        return unconstrained_schedule(np.asarray(raw).reshape(self.n), self.T)


@dataclass(frozen=True, eq=False)
class FixedActions:
    """Baseline: ignores the (empty) action and always returns one schedule."""

    fixed: FidelitySchedule
    dim: int = 0

    def schedule(self, raw: np.ndarray) -> FidelitySchedule:
        return self.fixed


def make_action_space(kind: str, bounds: ActionBounds = ActionBounds()) -> ActionSpace:
    kinds = {
        "dec": lambda: BlendedActions(bounds),
        "inc": lambda: BlendedActions(bounds, reverse=True),
        "unc": UnconstrainedActions,
    }
    if kind not in kinds:
        raise ConfigError(f"unknown action space {kind!r}; expected one of {sorted(kinds)}")
    return kinds[kind]()


# ----------------------------------------------------------------------------
# config and records
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RewardConfig:
    k_progress: float = 10.0
    r_collision: float = -50.0
    k_time: float = -0.05
    d_obs: float = 0.05
    k_obs: float = 1.0
    goal_radius: float = 0.3
    max_episode_steps: int = 500

    def __post_init__(self) -> None:
        if self.d_obs <= 0 or self.max_episode_steps < 1:
            raise ConfigError("d_obs must be positive and max_episode_steps >= 1")


@dataclass(frozen=True)
class EnvConfig:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    laser_beams: int = LIDAR_BEAMS
    laser_pool: int = 1  # min-pool factor; 10 turns 720 beams into 72
    max_range: float = DEFAULT_MAX_RANGE
    sim_dt: float = 0.001

    def __post_init__(self) -> None:
        if self.laser_beams % self.laser_pool:
            raise ConfigError("laser_pool must divide laser_beams")

    @property
    def laser_dims(self) -> int:
        return self.laser_beams // self.laser_pool

    def obs_dim(self, action_dim: int) -> int:
        return self.laser_dims + action_dim + 2 + GOAL_INFO_DIMS


@dataclass
class EpisodeRecord:
    success: bool
    collided: bool
    timeout: bool
    traversal_time: float
    steps: int
    world_seed: int
    cumulative_reward: float
    reward_components: dict = field(default_factory=dict)
    trace: list | None = field(default=None, repr=False)


# ----------------------------------------------------------------------------
# reward
# ----------------------------------------------------------------------------


def reward_components(
    prev_dist: float, new_dist: float, collided: bool, scan: LidarScan, cfg: RewardConfig
) -> dict[str, float]:
    near = k_nearest_obstacle_distances(scan, 10)
    close = near[near < cfg.d_obs]
    return {
        "progress": cfg.k_progress * (prev_dist - new_dist),
        "collision": cfg.r_collision if collided else 0.0,
        "time": cfg.k_time,
        "obstacle": -cfg.k_obs * float(np.sum((1.0 - close / cfg.d_obs) ** 2)),
    }


def compute_reward(prev_dist: float, new_dist: float, collided: bool, scan: LidarScan, cfg: RewardConfig) -> float:
    c = reward_components(prev_dist, new_dist, collided, scan, cfg)
    return c["progress"] + c["collision"] + c["time"] + c["obstacle"]


# ----------------------------------------------------------------------------
# environment
# ----------------------------------------------------------------------------


@dataclass
class StepInfo:
    control: Control
    schedule: FidelitySchedule
    components: dict
    success: bool = False
    collided: bool = False
    timeout: bool = False
    infeasible: bool = False
    plan_source: str = ""


class NavEnv:
    """Meta-MDP over one world. Not thread-safe; give each actor its own instance."""

    def __init__(self, world: OccupancyWorld, cfg: EnvConfig, actions: ActionSpace) -> None:
        self.world = world
        self.cfg = cfg
        self.actions = actions
        self.planner = Planner(cfg.planner)
        self.global_planner = GlobalPlanner(world, cfg.planner.robot_radius, cfg.planner.lookahead)
        self.state: RobotState | None = None
        self.steps = 0
        self.time = 0.0
        self.seed = 0
        self.prev_action = np.zeros(actions.dim)
        self.trace: list[RobotState] = []

    @property
    def obs_dim(self) -> int:
        return self.cfg.obs_dim(self.actions.dim)

    def goal_distance(self, state: RobotState) -> float:
        gx, gy = self.world.goal
        return math.hypot(gx - state.x, gy - state.y)

    def reset(self, seed: int = 0) -> np.ndarray:
        sx, sy, syaw = self.world.start
        self.state = RobotState(sx, sy, syaw, 0.0, 0.0)
        self.steps = 0
        self.time = 0.0
        self.seed = int(seed)
        self.prev_action = np.zeros(self.actions.dim)
        self.planner.reset()
        self.trace = [self.state]
        return self.observe(self._scan())

    def _scan(self) -> LidarScan:
        return cast_lidar(self.world, self.state, self.cfg.max_range, self.cfg.laser_beams)

    def observe(self, scan: LidarScan) -> np.ndarray:
        cfg = self.cfg
        ranges = scan.ranges
        if cfg.laser_pool > 1:
            ranges = ranges.reshape(-1, cfg.laser_pool).min(axis=1)
        laser = np.clip(ranges / cfg.max_range * 2.0 - 1.0, -1.0, 1.0)
        s = self.state
        lg = self.global_planner.local_goal(s.x, s.y)
        gx, gy = self.world.goal
        goal_info = [
            math.hypot(lg.x - s.x, lg.y - s.y),
            wrap_angle(math.atan2(lg.y - s.y, lg.x - s.x) - s.yaw),
            math.hypot(gx - s.x, gy - s.y),
            wrap_angle(math.atan2(gy - s.y, gx - s.x) - s.yaw),
        ]
        return np.concatenate([laser, self.prev_action, [s.v, s.w], goal_info])

    def _simulate(self, u: Control) -> tuple[RobotState, float, bool, bool]:
        """Integrate one control period; returns (state, elapsed, collided, reached)."""
        cfg = self.cfg
        s = self.state
        n_sub = int(round(cfg.planner.control_period / cfg.sim_dt))
        t = np.arange(1, n_sub + 1) * cfg.sim_dt
        dx, dy, dyaw = arc_displacement(s.yaw, u.v_cmd, u.w_cmd, t)
        xs, ys = s.x + dx, s.y + dy
        hit = collides(self.world, xs, ys, cfg.planner.robot_radius)
        gx, gy = self.world.goal
        reach = np.hypot(xs - gx, ys - gy) <= cfg.reward.goal_radius
        first_hit = int(np.argmax(hit)) if hit.any() else n_sub
        first_reach = int(np.argmax(reach)) if reach.any() else n_sub
        if first_reach < n_sub and first_reach <= first_hit:
            k = first_reach
            return RobotState(xs[k], ys[k], s.yaw + dyaw[k], u.v_cmd, u.w_cmd), t[k], False, True
        if first_hit < n_sub:
            k = first_hit
            return RobotState(xs[k], ys[k], s.yaw + dyaw[k], 0.0, 0.0), t[k], True, False
        return RobotState(xs[-1], ys[-1], s.yaw + dyaw[-1], u.v_cmd, u.w_cmd), t[-1], False, False

    def step(self, raw_action) -> tuple[np.ndarray, float, bool, StepInfo]:
        if self.state is None:
            raise ConfigError("call reset() before step()")
        raw = np.clip(np.asarray(raw_action, dtype=float).reshape(self.actions.dim), -1.0, 1.0)
        schedule = self.actions.schedule(raw)
        s = self.state
        lg = self.global_planner.local_goal(s.x, s.y)
        infeasible = False
        try:
            result = self.planner.plan(
                s, self.world, (lg.x, lg.y), schedule, rng_seed=[self.seed, self.steps], terminal=lg.terminal
            )
            u, source = result.control, result.source
        except NoFeasibleTrajectory:
            u, source, infeasible = Control(0.0, 0.0), "infeasible", True

        prev_dist = self.goal_distance(s)
        self.state, elapsed, collided, reached = self._simulate(u)
        self.time += float(elapsed)
        self.steps += 1
        self.prev_action = raw
        self.trace.append(self.state)
        scan = self._scan()
        comps = reward_components(prev_dist, self.goal_distance(self.state), collided, scan, self.cfg.reward)
        reward = comps["progress"] + comps["collision"] + comps["time"] + comps["obstacle"]
        timeout = not (collided or reached) and self.steps >= self.cfg.reward.max_episode_steps
        info = StepInfo(u, schedule, comps, reached, collided, timeout, infeasible, source)
        return self.observe(scan), reward, reached or collided or timeout, info


# ----------------------------------------------------------------------------
# episodes
# ----------------------------------------------------------------------------

Policy = Callable[[np.ndarray], np.ndarray]


def zero_policy(dim: int) -> Policy:
    return lambda obs: np.zeros(dim)


@dataclass
class RawStep:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool  # true termination (goal or collision), not a timeout


def run_episode(
    policy: Policy,
    world: OccupancyWorld,
    cfg: EnvConfig,
    actions: ActionSpace,
    seed: int = 0,
    explore_noise: float = 0.0,
    noise_seed=None,
    keep_trace: bool = False,
) -> tuple[EpisodeRecord, list[RawStep]]:
    """Run one episode; with ``explore_noise`` > 0 Gaussian noise is added to actions."""
    env = NavEnv(world, cfg, actions)
    obs = env.reset(seed)
    rng = np.random.default_rng(noise_seed if noise_seed is not None else [seed, 1])
    steps: list[RawStep] = []
    total = 0.0
    comp_sum = {"progress": 0.0, "collision": 0.0, "time": 0.0, "obstacle": 0.0}
    info = None
    done = False
    while not done:
        a = np.asarray(policy(obs), dtype=float).reshape(actions.dim)
        if explore_noise > 0:
            a = a + rng.normal(0.0, explore_noise, size=a.shape)
        a = np.clip(a, -1.0, 1.0)
        nxt, r, done, info = env.step(a)
        steps.append(RawStep(obs, a, r, nxt, info.success or info.collided))
        total += r
        for k, v in info.components.items():
            comp_sum[k] += v
        obs = nxt
    success, collided = info.success, info.collided
    record = EpisodeRecord(
        success=success,
        collided=collided,
        timeout=not (success or collided),
        traversal_time=env.time,
        steps=env.steps,
        world_seed=world.seed,
        cumulative_reward=total,
        reward_components=comp_sum,
    )
    if keep_trace:
        record.trace = env.trace
    return record, steps
