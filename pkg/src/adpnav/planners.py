"""Sampling-based local planners evaluated under a fidelity schedule.

All three planners share the rollout engine in :mod:`adpnav.dynamics` and the
cost in :func:`batch_cost`. Colliding samples get infinite cost. Whatever a
planner proposes passes through :func:`safety_filter` before it is emitted,
so an emitted command's own constant-control rollout is collision-free
whenever the robot is not already in contact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    Control,
    RobotState,
    RolloutBatch,
    Trajectory,
    VelocityLimits,
    rollout_batch,
    wrap_angle,
)
from .errors import InvalidParams, NoFeasibleTrajectory
from .schedule import FidelitySchedule
from .world import DEFAULT_ROBOT_RADIUS, OccupancyWorld, obstacle_distance

EPS_C = 1e-6


class Variant(str, enum.Enum):
    DWA = "dwa"
    MPPI = "mppi"
    LOGMPPI = "logmppi"


@dataclass(frozen=True)
class CostWeights:
    w_goal: float = 1.0
    w_clearance: float = 0.5
    w_path: float = 0.2
    w_smooth: float = 0.1
    # metres of goal distance per radian of final heading error; 0 disables
    w_heading: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.w_goal, self.w_clearance, self.w_path, self.w_smooth, self.w_heading)
        if min(vals) < 0 or max(vals) == 0:
            raise InvalidParams("cost weights must be non-negative and not all zero")


@dataclass(frozen=True)
class PlannerConfig:
    variant: Variant = Variant.DWA
    dwa_grid: tuple[int, int] = (20, 20)
    mppi_samples: int = 550
    mppi_lambda: float = 0.3
    sigma_v: float = 0.3
    sigma_w: float = 0.5
    noise_corr: float = 0.8  # AR(1) correlation of MPPI noise between consecutive intervals
    select_top: int = 10
    weights: CostWeights = field(default_factory=CostWeights)
    limits: VelocityLimits = field(default_factory=VelocityLimits)
    control_period: float = 0.1
    d_safe: float = 0.5
    lookahead: float = 2.0
    robot_radius: float = DEFAULT_ROBOT_RADIUS
    collision_margin: float = 0.05  # planner-only padding on the robot radius

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Variant(self.variant))
        if min(self.dwa_grid) < 1 or self.mppi_samples < 1:
            raise InvalidParams("sample counts must be >= 1")
        n_samples = self.dwa_grid[0] * self.dwa_grid[1] if self.variant == Variant.DWA else self.mppi_samples
        if not 1 <= self.select_top <= n_samples:
            raise InvalidParams("select_top must lie in [1, sample count]")
        if not 0.0 <= self.noise_corr < 1.0:
            raise InvalidParams("noise_corr must lie in [0, 1)")
        if self.mppi_lambda <= 0:
            raise InvalidParams("mppi_lambda must be positive")
        if self.collision_margin < 0:
            raise InvalidParams("collision_margin must be non-negative")
        if self.control_period <= 0 or self.d_safe <= 0:
            raise InvalidParams("control_period and d_safe must be positive")


def planning_radius(state: RobotState, world: OccupancyWorld, cfg: PlannerConfig) -> float:
    """Robot radius plus margin, shrunk so the current pose itself never counts as a hit.

    Sampled rollouts only see discrete states, so a path that grazes a corner
    between two samples can look free; the margin absorbs that. When the robot
    is already inside the margin it is reduced to the current clearance.
    """
    r = cfg.robot_radius
    if cfg.collision_margin == 0:
        return r
    d = float(obstacle_distance(world, state.x, state.y, r + cfg.collision_margin + 1e-3))
    return r + min(cfg.collision_margin, max(0.0, d - r - 1e-3))


# ----------------------------------------------------------------------------
# cost
# ----------------------------------------------------------------------------


def batch_cost(
    batch: RolloutBatch,
    state: RobotState,
    world: OccupancyWorld,
    local_goal: tuple[float, float],
    weights: CostWeights,
    d_safe: float = 0.5,
    terminal: bool = False,
) -> np.ndarray:
    """Cost per rollout; colliding rollouts cost +inf.

    The goal term is the distance to the local goal plus ``w_heading`` times
    the final heading error towards it.

    When ``terminal`` is set the local goal is the global goal and the goal
    term uses the closest approach along the rollout, since the episode ends
    as soon as the robot arrives there.
    """
    pts = batch.states[:, 1:, :2]
    gx, gy = local_goal
    d_goal = np.hypot(pts[..., 0] - gx, pts[..., 1] - gy)
    goal = d_goal.min(axis=1) if terminal else d_goal[:, -1]
    if weights.w_heading:
        # without this, turning in place looks no better than standing still
        last = batch.states[:, -1]
        err = np.abs(wrap_angle(np.arctan2(gy - last[:, 1], gx - last[:, 0]) - last[:, 2]))
        goal = goal + weights.w_heading * np.where(d_goal[:, -1] > 1e-9, err, 0.0)

    clear = obstacle_distance(world, pts[..., 0], pts[..., 1], cap=d_safe)
    clearance = (np.maximum(0.0, 1.0 - clear / d_safe) ** 2).sum(axis=1)

    xy = batch.states[:, :, :2]
    seg = np.hypot(*np.moveaxis(np.diff(xy, axis=1), -1, 0)).sum(axis=1)
    chord = np.hypot(xy[:, -1, 0] - xy[:, 0, 0], xy[:, -1, 1] - xy[:, 0, 1])
    path = np.maximum(seg - chord, 0.0)

    smooth = np.abs(batch.v[:, 0] - state.v) + np.abs(batch.w[:, 0] - state.w)

    cost = (
        weights.w_goal * goal
        + weights.w_clearance * clearance
        + weights.w_path * path
        + weights.w_smooth * smooth
    )
    return np.where(batch.collision, np.inf, cost)


def trajectory_cost(
    traj: Trajectory,
    world: OccupancyWorld,
    local_goal: tuple[float, float],
    weights: CostWeights,
    d_safe: float = 0.5,
    terminal: bool = False,
) -> float:
    """Cost of a single trajectory; its first state carries the current velocity."""
    if not traj.states:
        raise InvalidParams("empty trajectory")
    s0 = traj.states[0]
    states = np.array([[s.x, s.y, s.yaw] for s in traj.states])[None]
    n = len(traj.states) - 1
    ctrl = traj.controls[: max(n, 1)]
    v = np.array([[c.v_cmd for c in ctrl]])
    w = np.array([[c.w_cmd for c in ctrl]])
    if n == 0:
        states = np.concatenate([states, states], axis=1)
    batch = RolloutBatch(states, v, w, np.array([traj.collision]), np.array([n]))
    return float(batch_cost(batch, s0, world, local_goal, weights, d_safe, terminal)[0])


def clearance_penalty(distance: float, d_safe: float) -> float:
    return max(0.0, 1.0 - distance / d_safe) ** 2


# ----------------------------------------------------------------------------
# selection
# ----------------------------------------------------------------------------


def blend_weights(costs: np.ndarray, k: int, eps: float = EPS_C) -> tuple[np.ndarray, np.ndarray]:
    """Indices of up to k cheapest finite-cost samples and their normalised 1/cost weights."""
    costs = np.asarray(costs, dtype=float)
    ok = np.flatnonzero(np.isfinite(costs))
    if ok.size == 0:
        raise NoFeasibleTrajectory("all candidate trajectories collide")
    order = ok[np.lexsort((ok, costs[ok]))][:k]
    wts = 1.0 / (costs[order] + eps)
    return order, wts / wts.sum()


def select_and_blend(trajectories: list[Trajectory], k: int = 10, eps: float = EPS_C) -> Control:
    """Cost-weighted mean of the first controls of the k best collision-free trajectories."""
    costs = np.array([math.inf if t.collision else t.cost for t in trajectories])
    idx, wts = blend_weights(costs, k, eps)
    v = sum(wt * trajectories[i].first_control.v_cmd for i, wt in zip(idx, wts))
    w = sum(wt * trajectories[i].first_control.w_cmd for i, wt in zip(idx, wts))
    return Control(float(v), float(w))


def mppi_weights(costs: np.ndarray, lam: float, log_transform: bool = False) -> np.ndarray:
    """Normalised importance weights; infinite costs get weight 0.

    Plain MPPI uses exp(-(S - S_min)/lambda). The log variant applies the
    same softmin to log(1 + S - S_min), i.e. weights (1 + S - S_min)^(-1/lambda).
    """
    costs = np.asarray(costs, dtype=float)
    ok = np.isfinite(costs)
    if not ok.any():
        raise NoFeasibleTrajectory("all sampled trajectories collide")
    rel = np.where(ok, costs - costs[ok].min(), 0.0)
    if log_transform:
        rel = np.log1p(rel)
    eta = np.where(ok, np.exp(-rel / lam), 0.0)
    return eta / eta.sum()


def safety_filter(
    state: RobotState,
    proposal: Control,
    fallbacks: list[Control],
    schedule: FidelitySchedule,
    world: OccupancyWorld,
    radius: float,
) -> tuple[Control, str]:
    """First of proposal, fallbacks, stop whose constant rollout stays collision-free."""
    options = [proposal, *fallbacks]
    n = schedule.n
    v = np.array([[u.v_cmd] * n for u in options])
    w = np.array([[u.w_cmd] * n for u in options])
    batch = rollout_batch(state, v, w, schedule.intervals, world, radius)
    for i, u in enumerate(options):
        if not batch.collision[i]:
            return u, "proposal" if i == 0 else "fallback"
    return Control(0.0, 0.0), "stop"


# ----------------------------------------------------------------------------
# DWA
# ----------------------------------------------------------------------------


def dynamic_window(state: RobotState, cfg: PlannerConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    lim, dt = cfg.limits, cfg.control_period
    v_lo = max(0.0, state.v - lim.a_v * dt)
    v_hi = min(lim.v_max, state.v + lim.a_v * dt)
    w_lo = max(-lim.w_max, state.w - lim.a_w * dt)
    w_hi = min(lim.w_max, state.w + lim.a_w * dt)
    if v_lo > v_hi:  # current speed above the limit: brake as hard as allowed
        v_lo = v_hi = max(0.0, min(lim.v_max, state.v - lim.a_v * dt))
    if w_lo > w_hi:
        w_lo = w_hi = float(np.clip(state.w, -lim.w_max, lim.w_max))
    return (v_lo, v_hi), (w_lo, w_hi)


def dwa_candidates(state: RobotState, cfg: PlannerConfig) -> tuple[np.ndarray, np.ndarray]:
    (v_lo, v_hi), (w_lo, w_hi) = dynamic_window(state, cfg)
    nv, nw = cfg.dwa_grid
    vv, ww = np.meshgrid(np.linspace(v_lo, v_hi, nv), np.linspace(w_lo, w_hi, nw), indexing="ij")
    return vv.ravel(), ww.ravel()


@dataclass
class PlanResult:
    control: Control
    costs: np.ndarray
    batch: RolloutBatch
    source: str = "proposal"
    nominal: np.ndarray | None = None


def dwa_plan(
    state: RobotState,
    world: OccupancyWorld,
    local_goal: tuple[float, float],
    schedule: FidelitySchedule,
    cfg: PlannerConfig,
    terminal: bool = False,
) -> PlanResult:
    cv, cw = dwa_candidates(state, cfg)
    n = schedule.n
    radius = planning_radius(state, world, cfg)
    batch = rollout_batch(
        state, np.repeat(cv[:, None], n, 1), np.repeat(cw[:, None], n, 1),
        schedule.intervals, world, radius,
    )
    costs = batch_cost(batch, state, world, local_goal, cfg.weights, cfg.d_safe, terminal)
    idx, wts = blend_weights(costs, cfg.select_top)
    proposal = Control(float(wts @ cv[idx]), float(wts @ cw[idx]))
    fallbacks = [Control(float(cv[i]), float(cw[i])) for i in idx]
    u, src = safety_filter(state, proposal, fallbacks, schedule, world, radius)
    return PlanResult(cfg.limits.clamp(u), costs, batch, src)


# ----------------------------------------------------------------------------
# MPPI
# ----------------------------------------------------------------------------


def shift_nominal(nominal: np.ndarray, schedule: FidelitySchedule, shift: float) -> np.ndarray:
    """Time-shift a piecewise-constant sequence by ``shift`` seconds, holding the last value."""
    starts = schedule.times[:-1] + shift
    idx = np.searchsorted(schedule.times, starts, side="right") - 1
    return nominal[np.clip(idx, 0, schedule.n - 1)].copy()


def resample_nominal(nominal: np.ndarray, old: FidelitySchedule, new: FidelitySchedule) -> np.ndarray:
    """Re-express a nominal sequence defined on ``old`` over the intervals of ``new``."""
    idx = np.searchsorted(old.times, new.times[:-1], side="right") - 1
    return nominal[np.clip(idx, 0, old.n - 1)].copy()


def ar1_noise(rng: np.random.Generator, k: int, n: int, rho: float) -> np.ndarray:
    """(k, n, 2) unit-variance Gaussian noise, AR(1)-correlated along the interval axis."""
    xi = rng.standard_normal((k, n, 2))
    if rho == 0.0:
        return xi
    out = np.empty_like(xi)
    out[:, 0] = xi[:, 0]
    scale = math.sqrt(1.0 - rho * rho)
    for i in range(1, n):
        out[:, i] = rho * out[:, i - 1] + scale * xi[:, i]
    return out


def _mppi(
    state: RobotState,
    world: OccupancyWorld,
    local_goal: tuple[float, float],
    schedule: FidelitySchedule,
    cfg: PlannerConfig,
    nominal: np.ndarray,
    rng_seed: int,
    terminal: bool,
    log_transform: bool,
) -> PlanResult:
    n = schedule.n
    nominal = np.asarray(nominal, dtype=float)
    if nominal.shape != (n, 2):
        raise InvalidParams(f"nominal must have shape ({n}, 2), got {nominal.shape}")
    lim = cfg.limits
    rng = np.random.default_rng(rng_seed)
    k = cfg.mppi_samples
    noise = ar1_noise(rng, k, n, cfg.noise_corr) * np.array([cfg.sigma_v, cfg.sigma_w])
    noise[0] = 0.0  # sample 0 replays the nominal
    seqs = nominal[None] + noise
    seqs[..., 0] = np.clip(seqs[..., 0], 0.0, lim.v_max)
    seqs[..., 1] = np.clip(seqs[..., 1], -lim.w_max, lim.w_max)

    radius = planning_radius(state, world, cfg)
    batch = rollout_batch(state, seqs[..., 0], seqs[..., 1], schedule.intervals, world, radius)
    costs = batch_cost(batch, state, world, local_goal, cfg.weights, cfg.d_safe, terminal)
    eta = mppi_weights(costs, cfg.mppi_lambda, log_transform)
    updated = np.tensordot(eta, seqs, axes=1)
    proposal = Control(float(updated[0, 0]), float(updated[0, 1]))
    best = np.argsort(costs, kind="stable")[: cfg.select_top]
    fallbacks = [Control(float(seqs[i, 0, 0]), float(seqs[i, 0, 1])) for i in best if np.isfinite(costs[i])]
    u, src = safety_filter(state, proposal, fallbacks, schedule, world, radius)
    return PlanResult(lim.clamp(u), costs, batch, src, shift_nominal(updated, schedule, cfg.control_period))


def mppi_plan(state, world, local_goal, schedule, cfg, nominal, rng_seed, terminal=False) -> PlanResult:
    """One MPPI iteration; ``PlanResult.nominal`` is the shifted warm start for the next cycle."""
    return _mppi(state, world, local_goal, schedule, cfg, nominal, rng_seed, terminal, False)


def logmppi_plan(state, world, local_goal, schedule, cfg, nominal, rng_seed, terminal=False) -> PlanResult:
    """MPPI with log-transformed costs, which flattens the weight distribution."""
    return _mppi(state, world, local_goal, schedule, cfg, nominal, rng_seed, terminal, True)


# ----------------------------------------------------------------------------
# stateful wrapper used by the environment
# ----------------------------------------------------------------------------


class Planner:
    """Holds per-episode planner state (the MPPI nominal) across cycles."""

    def __init__(self, cfg: PlannerConfig) -> None:
        self.cfg = cfg
        self.nominal: np.ndarray | None = None
        self.nominal_schedule: FidelitySchedule | None = None

    def reset(self) -> None:
        self.nominal = None
        self.nominal_schedule = None

    def plan(
        self,
        state: RobotState,
        world: OccupancyWorld,
        local_goal: tuple[float, float],
        schedule: FidelitySchedule,
        rng_seed: int = 0,
        terminal: bool = False,
    ) -> PlanResult:
        cfg = self.cfg
        if cfg.variant == Variant.DWA:
            return dwa_plan(state, world, local_goal, schedule, cfg, terminal)
        if self.nominal is None:
            nominal = np.zeros((schedule.n, 2))
        elif self.nominal_schedule != schedule:
            nominal = resample_nominal(self.nominal, self.nominal_schedule, schedule)
        else:
            nominal = self.nominal
        fn = logmppi_plan if cfg.variant == Variant.LOGMPPI else mppi_plan
        result = fn(state, world, local_goal, schedule, cfg, nominal, rng_seed, terminal)
        self.nominal = result.nominal
        self.nominal_schedule = schedule
        return result
