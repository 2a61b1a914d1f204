"""Replay storage and n-step return accumulation."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InsufficientData, ShapeMismatch


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    n_step_return: float
    bootstrap_state: np.ndarray
    discount_pow: float
    n_used: int


def accumulate_n_step(episode: Sequence, gamma: float, n: int) -> list[Transition]:
    """Turn (s, a, r, s', done) steps into n-step transitions, one per step.

    ``episode`` items may be tuples or objects with obs/action/reward/next_obs/done
    attributes. A window that reaches a terminal step gets discount_pow 0; a
    window cut short by the end of the stream (a timeout) bootstraps from the
    last next-state with gamma**m.
    """
    steps = [
        (e.obs, e.action, e.reward, e.next_obs, e.done) if hasattr(e, "obs") else tuple(e)
        for e in episode
    ]
    out = []
    T = len(steps)
    for t in range(T):
        ret = 0.0
        m = 0
        terminal = False
        while m < n and t + m < T:
            r, done = steps[t + m][2], steps[t + m][4]
            ret += gamma**m * r
            m += 1
            if done:
                terminal = True
                break
        boot = steps[t + m - 1][3]
        out.append(
            Transition(
                state=np.asarray(steps[t][0], dtype=float),
                action=np.asarray(steps[t][1], dtype=float),
                n_step_return=float(ret),
                bootstrap_state=np.asarray(boot, dtype=float),
                discount_pow=0.0 if terminal else float(gamma**m),
                n_used=m,
            )
        )
    return out


@dataclass
class Batch:
    state: np.ndarray
    action: np.ndarray
    ret: np.ndarray
    boot: np.ndarray
    disc: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions.

    Appends are atomic per transition, so concurrent actors may push while a
    learner samples; a sampled batch only ever sees fully written rows.
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int) -> None:
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.state = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.action = np.zeros((capacity, act_dim), dtype=np.float32)
        self.ret = np.zeros(capacity)
        self.boot = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.disc = np.zeros(capacity)
        self.size = 0
        self.cursor = 0
        self.total_added = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self.size

    def add(self, tr: Transition) -> None:
        if tr.state.shape != (self.obs_dim,) or tr.action.shape != (self.act_dim,):
            raise ShapeMismatch("transition does not match buffer dimensions")
        with self._lock:
            i = self.cursor
            self.state[i] = tr.state
            self.action[i] = tr.action
            self.ret[i] = tr.n_step_return
            self.boot[i] = tr.bootstrap_state
            self.disc[i] = tr.discount_pow
            self.cursor = (i + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)
            self.total_added += 1

    def extend(self, transitions: Sequence[Transition]) -> None:
        for tr in transitions:
            self.add(tr)

    def ordered_indices(self) -> np.ndarray:
        """Storage indices from oldest to newest."""
        start = self.cursor if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        with self._lock:
            if self.size < batch_size:
                raise InsufficientData(f"buffer holds {self.size} < batch {batch_size}")
            idx = rng.integers(0, self.size, size=batch_size)
            return Batch(
                self.state[idx].astype(float),
                self.action[idx].astype(float),
                self.ret[idx].copy(),
                self.boot[idx].astype(float),
                self.disc[idx].copy(),
            )
