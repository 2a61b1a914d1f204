"""BARN-style benchmark: per-trial scores, trimming, and the report CSV."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .env import ActionSpace, EnvConfig, FixedActions, make_action_space, run_episode, zero_policy
from .errors import ConfigError, InvalidInput
from .pathing import shortest_path_length
from .planners import Variant
from .rl.checkpoint import load_checkpoint
from .rl.mlp import forward
from .schedule import DDP_N, DDP_P, DDP_T, ScheduleParams, ddp_schedule, fixed_schedule, incremental_schedule
from .world import DEFAULT_ROBOT_RADIUS, OccupancyWorld

FAIL_TIME = 50.0
REPORT_COLUMNS = [
    "world_seed", "method", "v_max", "success_pct", "avg_time_s", "avg_score", "collision_pct", "timeout_pct",
]
FIXED_METHODS = ("ddp", "uniform", "inc")


def barn_score(success: bool, actual_time: float, optimal_time: float) -> float:
    """OT / clip(AT, 2 OT, 8 OT) for a success, 0 otherwise."""
    if not (actual_time > 0 and optimal_time > 0):
        raise InvalidInput("actual and optimal times must be positive")
    if not success:
        return 0.0
    return optimal_time / min(max(actual_time, 2.0 * optimal_time), 8.0 * optimal_time)


def optimal_time(world: OccupancyWorld, v_max: float, robot_radius: float = DEFAULT_ROBOT_RADIUS) -> float:
    if v_max <= 0:
        raise InvalidInput("v_max must be positive")
    return shortest_path_length(world, robot_radius) / v_max


# ----------------------------------------------------------------------------
# methods
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    """A schedule source plus a planner.

    ``schedule`` is one of ddp, uniform, inc (fixed hand-set schedules) or adp,
    which needs ``checkpoint``; the checkpoint header names its action space.
    """

    schedule: str = "ddp"
    planner: Variant = Variant.DWA
    checkpoint: str | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "planner", Variant(self.planner))
        if self.schedule not in (*FIXED_METHODS, "adp"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.schedule == "adp" and not self.checkpoint:
            raise ConfigError("adp methods need a checkpoint")

    @property
    def name(self) -> str:
        return self.label or f"{self.schedule}-{self.planner.value}"

    def build(self) -> tuple[ActionSpace, object]:
        """(action space, policy) pair."""
        if self.schedule == "ddp":
            return FixedActions(ddp_schedule()), zero_policy(0)
        if self.schedule == "uniform":
            return FixedActions(fixed_schedule(DDP_T, DDP_N)), zero_policy(0)
        if self.schedule == "inc":
            return FixedActions(incremental_schedule(ScheduleParams(DDP_T, DDP_N, DDP_P, 0.0))), zero_policy(0)
        nets, header = load_checkpoint(self.checkpoint)
        actions = make_action_space(header["extra"].get("action_space", "dec"))
        actor = nets["actor"]
        return actions, lambda obs: forward(actor, obs)


# ----------------------------------------------------------------------------
# trials and trimming
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Trial:
    world_seed: int
    run: int
    success: bool
    collided: bool
    timeout: bool
    time: float  # traversal time, FAIL_TIME for any failure
    score: float


def trim_trials(trials: Sequence[Trial], trim: int) -> list[Trial]:
    """Drop the ``trim`` best and ``trim`` worst trials.

    Best means highest score, then shortest time, then lowest run index.
    """
    if len(trials) <= 2 * trim:
        raise ConfigError("need more than 2 * trim trials")
    ranked = sorted(trials, key=lambda t: (-t.score, t.time, t.run))
    return ranked[trim : len(ranked) - trim]


@dataclass(frozen=True)
class ReportRow:
    world_seed: str
    method: str
    v_max: float
    success_pct: float
    avg_time_s: float
    avg_score: float
    collision_pct: float
    timeout_pct: float


def summarize(trials: Sequence[Trial], world_seed: str, method: str, v_max: float) -> ReportRow:
    n = len(trials)
    pct = lambda flags: 100.0 * sum(flags) / n
    return ReportRow(
        world_seed=world_seed,
        method=method,
        v_max=float(v_max),
        success_pct=pct(t.success for t in trials),
        avg_time_s=float(np.mean([t.time for t in trials])),
        avg_score=float(np.mean([t.score for t in trials])),
        collision_pct=pct(t.collided for t in trials),
        timeout_pct=pct(t.timeout for t in trials),
    )


@dataclass
class BenchmarkReport:
    rows: list[ReportRow]
    trials: list[Trial] | None = None

    @property
    def aggregate(self) -> ReportRow:
        return next(r for r in self.rows if r.world_seed == "ALL")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in self.rows:
            writer.writerow([r.world_seed, r.method] + [repr(getattr(r, c)) for c in REPORT_COLUMNS[2:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> BenchmarkReport:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != REPORT_COLUMNS:
            raise InvalidInput(f"expected columns {REPORT_COLUMNS}")
        rows = [
            ReportRow(d["world_seed"], d["method"], *(float(d[c]) for c in REPORT_COLUMNS[2:]))
            for d in reader
        ]
        return cls(rows)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BenchmarkReport):
            return NotImplemented
        return self.rows == other.rows


def with_v_max(cfg: EnvConfig, v_max: float) -> EnvConfig:
    limits = replace(cfg.planner.limits, v_max=float(v_max))
    return replace(cfg, planner=replace(cfg.planner, limits=limits))


def run_trials(
    method: MethodSpec,
    world: OccupancyWorld,
    env_cfg: EnvConfig,
    runs: int,
    seed: int = 0,
) -> list[Trial]:
    actions, policy = method.build()
    v_max = env_cfg.planner.limits.v_max
    ot = optimal_time(world, v_max, env_cfg.planner.robot_radius)
    out = []
    for run in range(runs):
        rec, _ = run_episode(policy, world, env_cfg, actions, seed=seed + run)
        at = rec.traversal_time if rec.success else FAIL_TIME
        out.append(Trial(world.seed, run, rec.success, rec.collided, rec.timeout, at,
                         barn_score(rec.success, at, ot)))
    return out


def build_report(trials_by_world: Sequence[Sequence[Trial]], method: str, v_max: float, trim: int) -> BenchmarkReport:
    rows, kept_all, flat = [], [], []
    for trials in trials_by_world:
        kept = trim_trials(trials, trim)
        kept_all.extend(kept)
        flat.extend(trials)
        rows.append(summarize(kept, str(trials[0].world_seed), method, v_max))
    rows.append(summarize(kept_all, "ALL", method, v_max))
    return BenchmarkReport(rows, flat)


def run_benchmark(
    method: MethodSpec,
    worlds: Sequence[OccupancyWorld],
    env_cfg: EnvConfig | None = None,
    runs_per_world: int = 20,
    trim: int = 5,
    v_max: float | None = None,
    seed: int = 0,
    workers: int = 1,
) -> BenchmarkReport:
    """Run ``runs_per_world`` seeded trials on each world and trim per world.

    Failures count as FAIL_TIME seconds. Aggregates pool the retained trials
    of all worlds. Worlds may run on ``workers`` threads; the result does not
    depend on completion order.
    """
    if runs_per_world <= 2 * trim or trim < 0:
        raise ConfigError("runs_per_world must exceed 2 * trim")
    if not worlds:
        raise ConfigError("no worlds to benchmark")
    env_cfg = env_cfg or EnvConfig()
    if v_max is not None:
        env_cfg = with_v_max(env_cfg, v_max)
    v = env_cfg.planner.limits.v_max
    job = lambda w: run_trials(method, w, env_cfg, runs_per_world, seed)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_world = list(pool.map(job, worlds))
    else:
        per_world = [job(w) for w in worlds]
    return build_report(per_world, method.name, v, trim)


def is_well_formed(report: BenchmarkReport, n_worlds: int) -> bool:
    """Row count, column set, percentage ranges, and a finite aggregate."""
    if len(report.rows) != n_worlds + 1 or report.rows[-1].world_seed != "ALL":
        return False
    for r in report.rows:
        pcts = (r.success_pct, r.collision_pct, r.timeout_pct)
        if not all(0.0 <= p <= 100.0 for p in pcts):
            return False
        if not math.isclose(sum(pcts), 100.0, abs_tol=1e-9):
            return False
        if not (math.isfinite(r.avg_time_s) and 0.0 <= r.avg_score <= 0.5):
            return False
    return True
