import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adpnav.errors import InsufficientData, ShapeMismatch
from adpnav.rl.replay import ReplayBuffer, Transition, accumulate_n_step
from oracles import n_step_oracle


def episode(rewards, dones):
    return [(np.array([float(t)]), np.array([0.0]), r, np.array([float(t + 1)]), d)
            for t, (r, d) in enumerate(zip(rewards, dones))]


def test_two_step_hand_example():
    tr = accumulate_n_step(episode([1.0, 1.0], [False, False]), 0.5, 2)
    assert tr[0].n_step_return == 1.5
    assert tr[0].discount_pow == 0.25
    assert tr[0].bootstrap_state[0] == 2.0
    # the last step only sees one reward before the stream ends
    assert tr[1].n_step_return == 1.0 and tr[1].discount_pow == 0.5


def test_one_step_reduces_to_td0():
    tr = accumulate_n_step(episode([1.0, 2.0, 3.0], [False, False, True]), 0.9, 1)
    assert [t.n_step_return for t in tr] == [1.0, 2.0, 3.0]
    assert [t.discount_pow for t in tr] == [0.9, 0.9, 0.0]
    assert [t.bootstrap_state[0] for t in tr] == [1.0, 2.0, 3.0]


def test_terminal_inside_window():
    tr = accumulate_n_step(episode([1.0, 2.0], [False, True]), 0.9, 6)
    assert tr[0].n_step_return == pytest.approx(1.0 + 0.9 * 2.0)
    assert tr[0].discount_pow == 0.0
    assert tr[0].n_used == 2


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=25),
    st.floats(0.0, 1.0),
    st.integers(1, 8),
    st.booleans(),
)
def test_matches_brute_force(rewards, gamma, n, terminal):
    dones = [False] * len(rewards)
    dones[-1] = terminal
    tr = accumulate_n_step(episode(rewards, dones), gamma, n)
    ref = n_step_oracle(rewards, dones, gamma, n)
    assert len(tr) == len(rewards)
    for t, (ret, disc, m) in zip(tr, ref):
        assert t.n_step_return == pytest.approx(ret, abs=1e-12)
        assert t.discount_pow == pytest.approx(disc, abs=1e-15)
        assert t.n_used == m
        assert 0.0 <= t.discount_pow <= gamma**t.n_used + 1e-15


def make_tr(i: int, obs_dim=3, act_dim=2) -> Transition:
    return Transition(np.full(obs_dim, float(i)), np.zeros(act_dim), float(i), np.zeros(obs_dim), 0.5, 1)


def test_fifo_eviction():
    buf = ReplayBuffer(5, 3, 2)
    for i in range(8):
        buf.add(make_tr(i))
    assert len(buf) == 5 and buf.total_added == 8
    order = [buf.ret[i] for i in buf.ordered_indices()]
    assert order == [3.0, 4.0, 5.0, 6.0, 7.0]


def test_sample_requires_enough_data():
    buf = ReplayBuffer(10, 3, 2)
    buf.add(make_tr(0))
    with pytest.raises(InsufficientData):
        buf.sample(2, np.random.default_rng(0))
    batch = buf.sample(1, np.random.default_rng(0))
    assert batch.state.shape == (1, 3) and batch.disc[0] == 0.5


def test_shape_checked():
    buf = ReplayBuffer(10, 3, 2)
    with pytest.raises(ShapeMismatch):
        buf.add(make_tr(0, obs_dim=4))


def test_concurrent_appends_are_atomic():
    buf = ReplayBuffer(10_000, 3, 2)

    def push(base):
        for i in range(1000):
            buf.add(make_tr(base + i))

    threads = [threading.Thread(target=push, args=(k * 1000,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(buf) == 4000
    # every stored row is internally consistent
    assert np.array_equal(buf.state[:4000, 0], buf.ret[:4000])
    assert sorted(buf.ret[:4000]) == list(range(4000))
