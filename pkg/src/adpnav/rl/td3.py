"""Twin Delayed DDPG on top of :mod:`adpnav.rl.mlp`."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InsufficientData, ShapeMismatch
from .mlp import Adam, Mlp, backward_cache, forward, forward_cache, polyak
from .replay import Batch, ReplayBuffer


@dataclass(frozen=True)
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    target_noise_std: float = 0.2
    target_noise_clip: float = 0.5
    exploration_noise_std: float = 0.1
    batch_size: int = 256
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    n_step: int = 6
    buffer_capacity: int = 200_000
    actor_hidden: tuple[int, ...] = (256,)
    critic_hidden: tuple[int, ...] = (512, 256)
    final_layer_scale: float = 0.01

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Td3Nets:
    actor: Mlp
    critic1: Mlp
    critic2: Mlp
    actor_target: Mlp
    critic1_target: Mlp
    critic2_target: Mlp

    NAMES = ("actor", "critic1", "critic2", "actor_target", "critic1_target", "critic2_target")

    def items(self):
        return [(name, getattr(self, name)) for name in self.NAMES]


def build_nets(
    obs_dim: int,
    act_dim: int,
    cfg: Td3Config,
    seed: int = 0,
    init_action: np.ndarray | None = None,
) -> Td3Nets:
    """Fresh actor/critics with targets as exact copies.

    The actor's last layer is scaled by ``cfg.final_layer_scale`` so its output
    starts near ``init_action`` (via the output bias), which lets training begin
    from a chosen schedule.
    """
    rng = np.random.default_rng([seed, 3])
    actor = Mlp.create([obs_dim, *cfg.actor_hidden, act_dim], "tanh", rng, cfg.final_layer_scale)
    if init_action is not None:
        a0 = np.clip(np.asarray(init_action, dtype=float), -0.95, 0.95)
        actor.biases[-1][:] = np.arctanh(a0)
    critic1 = Mlp.create([obs_dim + act_dim, *cfg.critic_hidden, 1], "identity", rng)
    critic2 = Mlp.create([obs_dim + act_dim, *cfg.critic_hidden, 1], "identity", rng)
    return Td3Nets(actor, critic1, critic2, actor.copy(), critic1.copy(), critic2.copy())


def _q(critic: Mlp, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    return forward(critic, np.concatenate([s, a], axis=-1))[..., 0]


def td3_target(
    batch: Batch,
    actor_target: Mlp,
    critic1_target: Mlp,
    critic2_target: Mlp,
    cfg: Td3Config,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """y = R_n + discount_pow * min(Q1', Q2')(s_boot, smoothed target action)."""
    if batch.boot.shape[-1] != actor_target.sizes[0]:
        raise ShapeMismatch("bootstrap states do not match the actor input width")
    a = forward(actor_target, batch.boot)
    if noise is None:
        if cfg.target_noise_std > 0:
            rng = rng if rng is not None else np.random.default_rng(0)
            noise = rng.normal(0.0, cfg.target_noise_std, size=a.shape)
        else:
            noise = np.zeros_like(a)
    a = np.clip(a + np.clip(noise, -cfg.target_noise_clip, cfg.target_noise_clip), -1.0, 1.0)
    q = np.minimum(_q(critic1_target, batch.boot, a), _q(critic2_target, batch.boot, a))
    return batch.ret + batch.disc * q


@dataclass
class Td3Learner:
    nets: Td3Nets
    cfg: Td3Config
    opt_actor: Adam = field(init=False)
    opt_c1: Adam = field(init=False)
    opt_c2: Adam = field(init=False)
    updates: int = 0

    def __post_init__(self) -> None:
        self.opt_actor = Adam(self.nets.actor.params, self.cfg.lr_actor)
        self.opt_c1 = Adam(self.nets.critic1.params, self.cfg.lr_critic)
        self.opt_c2 = Adam(self.nets.critic2.params, self.cfg.lr_critic)

    def act(self, obs: np.ndarray) -> np.ndarray:
        return forward(self.nets.actor, obs)


def _critic_step(critic: Mlp, opt: Adam, sa: np.ndarray, y: np.ndarray) -> float:
    q, cache = forward_cache(critic, sa)
    err = q[:, 0] - y
    grads, _ = backward_cache(critic, cache, (2.0 / len(y)) * err[:, None])
    opt.step(grads)
    return float(np.mean(err**2))


def td3_update(
    buffer: ReplayBuffer | Batch,
    learner: Td3Learner,
    step_index: int,
    rng: np.random.Generator,
) -> dict:
    """One TD3 iteration: both critics always, actor and targets every ``policy_delay`` steps."""
    cfg, nets = learner.cfg, learner.nets
    if isinstance(buffer, Batch):
        batch = buffer
    else:
        if len(buffer) < cfg.batch_size:
            raise InsufficientData(f"need {cfg.batch_size} transitions, have {len(buffer)}")
        batch = buffer.sample(cfg.batch_size, rng)
    y = td3_target(batch, nets.actor_target, nets.critic1_target, nets.critic2_target, cfg, rng)
    sa = np.concatenate([batch.state, batch.action], axis=1)
    l1 = _critic_step(nets.critic1, learner.opt_c1, sa, y)
    l2 = _critic_step(nets.critic2, learner.opt_c2, sa, y)
    out = {"critic_loss": 0.5 * (l1 + l2), "actor_loss": math.nan}

    if step_index % cfg.policy_delay == 0:
        a, a_cache = forward_cache(nets.actor, batch.state)
        sa_pi = np.concatenate([batch.state, a], axis=1)
        q, q_cache = forward_cache(nets.critic1, sa_pi)
        n = len(q)
        # maximise Q1(s, pi(s)): loss = -mean(Q1)
        _, g_in = backward_cache(nets.critic1, q_cache, np.full((n, 1), -1.0 / n))
        g_a = g_in[:, batch.state.shape[1]:]
        grads, _ = backward_cache(nets.actor, a_cache, g_a)
        learner.opt_actor.step(grads)
        out["actor_loss"] = float(-q.mean())
        polyak(nets.actor_target, nets.actor, cfg.tau)
        polyak(nets.critic1_target, nets.critic1, cfg.tau)
        polyak(nets.critic2_target, nets.critic2, cfg.tau)
    learner.updates += 1
    return out
