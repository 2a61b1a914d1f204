"""Multi-actor / single-learner training loop.

Each assignment cycle hands every actor a frozen copy of the current actor
network and up to ``episodes_per_actor`` worlds, taken round-robin from the
training set. Actors push n-step transitions into the shared replay buffer,
then wait at a barrier; the learner runs ``updates_per_cycle`` TD3 steps
before the next cycle starts.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .env import (
    ActionSpace,
    BlendedActions,
    EnvConfig,
    EpisodeRecord,
    UnconstrainedActions,
    make_action_space,
    run_episode,
)
from .errors import ConfigError
from .rl.checkpoint import dumps_checkpoint, load_checkpoint
from .rl.mlp import Mlp, forward
from .rl.replay import ReplayBuffer, accumulate_n_step
from .rl.td3 import Td3Config, Td3Learner, build_nets, td3_update
from .schedule import DDP_N, DDP_P, DDP_T, ScheduleParams, ddp_schedule, encode_params
from .world import OccupancyWorld

log = logging.getLogger(__name__)

LOG_COLUMNS = ["cycle", "eval_success_rate", "eval_mean_reward", "critic_loss", "actor_loss"]


@dataclass(frozen=True)
class TrainConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    td3: Td3Config = field(default_factory=Td3Config)
    action_space: str = "dec"
    actor_count: int = 1
    cycles: int = 10
    episodes_per_actor: int = 2
    updates_per_cycle: int = 50
    warmup_transitions: int = 0
    eval_every: int = 5
    checkpoint_every: int = 0
    seed: int = 0
    init_from_ddp: bool = True

    def __post_init__(self) -> None:
        if self.actor_count < 1:
            raise ConfigError("actor_count must be >= 1")
        if not 1 <= self.episodes_per_actor <= 2:
            raise ConfigError("episodes_per_actor must be 1 or 2")
        if self.cycles < 0 or self.updates_per_cycle < 0:
            raise ConfigError("cycles and updates_per_cycle must be non-negative")


def ddp_init_action(actions: ActionSpace) -> np.ndarray:
    """Raw action whose decoded schedule approximates the DDP baseline."""
    if isinstance(actions, BlendedActions):
        return encode_params(ScheduleParams(DDP_T, DDP_N, DDP_P, 0.0), actions.bounds)
    if isinstance(actions, UnconstrainedActions):
        logs = np.log(ddp_schedule(actions.T, actions.n, DDP_P).intervals)
        return np.clip(logs - logs.mean(), -0.95, 0.95)
    return np.zeros(actions.dim)


@dataclass
class Assignment:
    cycle: int
    actor: int
    world_index: int
    steps: int
    record: EpisodeRecord


@dataclass
class TrainResult:
    learner: Td3Learner
    buffer: ReplayBuffer
    log_rows: list[dict]
    assignments: list[Assignment]
    checkpoint: bytes

    def episodes_per_actor_cycle(self) -> dict[tuple[int, int], int]:
        counts: dict[tuple[int, int], int] = {}
        for a in self.assignments:
            counts[(a.cycle, a.actor)] = counts.get((a.cycle, a.actor), 0) + 1
        return counts


def cycle_slots(cycle: int, n_worlds: int, actor_count: int, per_actor: int) -> list[tuple[int, int]]:
    """(actor, world_index) pairs for one cycle.

    The cycle covers min(n_worlds, actor_count * per_actor) consecutive worlds
    of the round-robin sequence; slot j goes to actor j mod actor_count.
    """
    slots = min(n_worlds, actor_count * per_actor)
    first = cycle * slots
    return [(j % actor_count, (first + j) % n_worlds) for j in range(slots)]


def policy_from(actor: Mlp):
    return lambda obs: forward(actor, obs)


def evaluate(
    actor: Mlp | None,
    worlds: Sequence[OccupancyWorld],
    env_cfg: EnvConfig,
    actions: ActionSpace,
    seed: int = 0,
) -> list[EpisodeRecord]:
    """Noise-free episodes, one per world."""
    policy = policy_from(actor) if actor is not None else (lambda obs: np.zeros(actions.dim))
    return [run_episode(policy, w, env_cfg, actions, seed=seed + i)[0] for i, w in enumerate(worlds)]


def _checkpoint(learner: Td3Learner, cfg: TrainConfig, cycle: int) -> bytes:
    extra = {"cycle": cycle, "action_space": cfg.action_space, "seed": cfg.seed}
    return dumps_checkpoint(dict(learner.nets.items()), _config_echo(cfg), learner.updates, extra)


def _config_echo(cfg: TrainConfig) -> dict:
    return {"td3": asdict(cfg.td3), "actor_count": cfg.actor_count, "cycles": cfg.cycles,
            "updates_per_cycle": cfg.updates_per_cycle, "laser_pool": cfg.env.laser_pool,
            "planner": cfg.env.planner.variant.value}


def train(
    cfg: TrainConfig,
    worlds: Sequence[OccupancyWorld],
    eval_worlds: Sequence[OccupancyWorld] | None = None,
    out_dir: str | Path | None = None,
) -> TrainResult:
    if not worlds:
        raise ConfigError("training needs at least one world")
    eval_worlds = list(eval_worlds) if eval_worlds is not None else list(worlds)
    actions = make_action_space(cfg.action_space)
    env_cfg = cfg.env
    obs_dim = env_cfg.obs_dim(actions.dim)
    init = ddp_init_action(actions) if cfg.init_from_ddp else None
    learner = Td3Learner(build_nets(obs_dim, actions.dim, cfg.td3, cfg.seed, init), cfg.td3)
    buffer = ReplayBuffer(cfg.td3.buffer_capacity, obs_dim, actions.dim)
    learner_rng = np.random.default_rng([cfg.seed, 7])
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    rows: list[dict] = []
    assignments: list[Assignment] = []
    step_index = 0

    def run_eval(cycle: int, losses: dict) -> None:
        recs = evaluate(learner.nets.actor, eval_worlds, env_cfg, actions, seed=cfg.seed * 1_000_003)
        row = {
            "cycle": cycle,
            "eval_success_rate": float(np.mean([r.success for r in recs])),
            "eval_mean_reward": float(np.mean([r.cumulative_reward for r in recs])),
            "critic_loss": losses.get("critic_loss", math.nan),
            "actor_loss": losses.get("actor_loss", math.nan),
        }
        rows.append(row)
        log.info("cycle %d eval success %.2f reward %.2f", cycle, row["eval_success_rate"], row["eval_mean_reward"])

    if cfg.eval_every:
        run_eval(0, {})

    def actor_job(cycle: int, actor_id: int, jobs: list[tuple[int, int]], snapshot: Mlp):
        done, transitions = [], []
        for slot, world_index in jobs:
            ep_seed = [cfg.seed, cycle, slot]
            rec, steps = run_episode(
                policy_from(snapshot), worlds[world_index], env_cfg, actions,
                seed=hash_seed(cfg.seed, cycle, slot),
                explore_noise=cfg.td3.exploration_noise_std,
                noise_seed=ep_seed,
            )
            transitions.extend(accumulate_n_step(steps, cfg.td3.gamma, cfg.td3.n_step))
            done.append(Assignment(cycle, actor_id, world_index, rec.steps, rec))
        return done, transitions

    pool = ThreadPoolExecutor(max_workers=cfg.actor_count) if cfg.actor_count > 1 else None
    try:
        for cycle in range(cfg.cycles):
            snapshot = learner.nets.actor.copy()
            slots = cycle_slots(cycle, len(worlds), cfg.actor_count, cfg.episodes_per_actor)
            per_actor: dict[int, list[tuple[int, int]]] = {}
            for slot, (actor_id, wi) in enumerate(slots):
                per_actor.setdefault(actor_id, []).append((slot, wi))
            if pool is None:
                results = [actor_job(cycle, a, jobs, snapshot) for a, jobs in sorted(per_actor.items())]
            else:
                futures = [pool.submit(actor_job, cycle, a, jobs, snapshot) for a, jobs in sorted(per_actor.items())]
                results = [f.result() for f in futures]  # barrier
            # appended in actor order after the barrier so the buffer layout is reproducible
            for done, transitions in results:
                assignments.extend(done)
                buffer.extend(transitions)

            losses: dict = {}
            if len(buffer) >= max(cfg.td3.batch_size, cfg.warmup_transitions):
                acc: dict[str, list[float]] = {"critic_loss": [], "actor_loss": []}
                for _ in range(cfg.updates_per_cycle):
                    d = td3_update(buffer, learner, step_index, learner_rng)
                    step_index += 1
                    for k in acc:
                        if not math.isnan(d[k]):
                            acc[k].append(d[k])
                losses = {k: float(np.mean(v)) if v else math.nan for k, v in acc.items()}

            if cfg.eval_every and (cycle + 1) % cfg.eval_every == 0:
                run_eval(cycle + 1, losses)
            if out is not None and cfg.checkpoint_every and (cycle + 1) % cfg.checkpoint_every == 0:
                (out / f"ckpt_{cycle + 1:05d}.bin").write_bytes(_checkpoint(learner, cfg, cycle + 1))
    finally:
        if pool is not None:
            pool.shutdown()

    final = _checkpoint(learner, cfg, cfg.cycles)
    if out is not None:
        (out / "final.ckpt").write_bytes(final)
        write_log(out / "train_log.csv", rows)
    return TrainResult(learner, buffer, rows, assignments, final)


def hash_seed(*parts: int) -> int:
    """Stable 32-bit seed from integer parts."""
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


def write_log(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()})


def load_policy(path: str | Path) -> tuple[Mlp, dict]:
    """Actor network and header from a checkpoint file."""
    nets, header = load_checkpoint(path)
    return nets["actor"], header
