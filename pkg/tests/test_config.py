import json

import pytest

from adpnav.config import env_config, from_dict, load_config, train_config
from adpnav.errors import ConfigError
from adpnav.planners import PlannerConfig, Variant


def test_yaml_nested(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(
        "env:\n  laser_pool: 10\n  planner:\n    variant: mppi\n    dwa_grid: [10, 10]\n"
        "    weights: {w_clearance: 1.5}\ntd3: {actor_hidden: [32]}\ntrain: {cycles: 4}\n"
    )
    cfg = load_config(p)
    env = env_config(cfg)
    assert env.laser_pool == 10 and env.planner.variant == Variant.MPPI
    assert env.planner.dwa_grid == (10, 10) and env.planner.weights.w_clearance == 1.5
    tc = train_config(cfg, seed=3, cycles=None)
    assert tc.cycles == 4 and tc.seed == 3 and tc.td3.actor_hidden == (32,) and tc.env == env


def test_json_and_empty(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bench": {"runs": 3}}))
    assert load_config(p) == {"bench": {"runs": 3}}
    assert load_config(None) == {}
    e = tmp_path / "e.yaml"
    e.write_text("")
    assert load_config(e) == {}


@pytest.mark.parametrize("text", ["nope: 1\n", "- 1\n", "env: {bogus: 1}\n", "env: {planner: {select_top: 0}}\n", "a: [\n"])
def test_rejects_bad_configs(tmp_path, text):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        env_config(load_config(p))


def test_from_dict_defaults():
    assert from_dict(PlannerConfig, None) == PlannerConfig()
