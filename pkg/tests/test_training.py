import numpy as np
import pytest

from adpnav.env import BlendedActions, EnvConfig, RewardConfig, UnconstrainedActions
from adpnav.errors import ConfigError
from adpnav.rl.td3 import Td3Config
from adpnav.schedule import ddp_schedule, decode_action, blended_schedule, unconstrained_schedule
from adpnav.training import TrainConfig, cycle_slots, ddp_init_action, train
from adpnav.world import generate_worlds


def tiny_cfg(**kw):
    base = dict(
        env=EnvConfig(laser_pool=10, reward=RewardConfig(max_episode_steps=15)),
        td3=Td3Config(actor_hidden=(16,), critic_hidden=(16, 16), batch_size=8),
        cycles=2,
        updates_per_cycle=3,
        eval_every=0,
    )
    base.update(kw)
    return TrainConfig(**base)


def test_cycle_slots_round_robin():
    assert cycle_slots(0, 8, 4, 2) == [(0, 0), (1, 1), (2, 2), (3, 3), (0, 4), (1, 5), (2, 6), (3, 7)]
    # fewer worlds than slots: each world once per cycle
    assert cycle_slots(1, 3, 4, 2) == [(0, 0), (1, 1), (2, 2)]
    assert [w for _, w in cycle_slots(1, 5, 2, 1)] == [2, 3]


@pytest.mark.parametrize("n_worlds,actors,per", [(8, 4, 2), (3, 4, 2), (5, 2, 1), (7, 3, 2)])
def test_quota_and_world_coverage(n_worlds, actors, per):
    for cycle in range(5):
        slots = cycle_slots(cycle, n_worlds, actors, per)
        counts = np.bincount([a for a, _ in slots], minlength=actors)
        assert counts.max() <= per and counts.min() >= (1 if n_worlds >= actors else 0)
        worlds = [w for _, w in slots]
        assert len(set(worlds)) == len(worlds)


def test_ddp_init_action_decodes_to_ddp():
    raw = ddp_init_action(BlendedActions())
    assert np.allclose(blended_schedule(decode_action(raw)).intervals, ddp_schedule().intervals)
    raw = ddp_init_action(UnconstrainedActions())
    got = unconstrained_schedule(raw, 2.0).intervals
    # raw scores are clipped inside (-1, 1), which flattens the first intervals
    assert np.all(np.diff(got) >= 0) and got.sum() == pytest.approx(2.0)
    assert np.max(np.abs(got - ddp_schedule().intervals)) < 0.025


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(actor_count=0)
    with pytest.raises(ConfigError):
        TrainConfig(episodes_per_actor=3)


def test_buffer_holds_every_step_and_quota():
    worlds = generate_worlds(1, 4)
    res = train(tiny_cfg(actor_count=2), worlds)
    assert len(res.buffer) == sum(a.steps for a in res.assignments)
    assert all(n <= 2 for n in res.episodes_per_actor_cycle().values())
    assert len(res.assignments) == 2 * 4


def test_training_is_deterministic(tmp_path):
    worlds = generate_worlds(1, 3)
    a = train(tiny_cfg(actor_count=2, eval_every=1), worlds, out_dir=tmp_path)
    b = train(tiny_cfg(actor_count=2, eval_every=1), worlds)
    assert a.checkpoint == b.checkpoint
    assert a.log_rows == b.log_rows
    assert (tmp_path / "final.ckpt").read_bytes() == a.checkpoint
    assert (tmp_path / "train_log.csv").read_text().splitlines()[0].startswith("cycle,")


def test_needs_worlds():
    with pytest.raises(ConfigError):
        train(tiny_cfg(), [])
