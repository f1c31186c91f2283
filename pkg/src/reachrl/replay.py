"""Uniform-sampling ring replay buffer backed by flat numpy arrays.

Stores the transition record plus h(s_next), which the safety-critic
targets and the barrier/safety-index functionals all need and which is
cheap to compute once at insertion time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs.base import Transition


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    h: np.ndarray
    h_next: np.ndarray
    c: np.ndarray
    done: np.ndarray  # 1.0 at constraint-relevant terminals, else 0.0
    r_stuck: np.ndarray  # one-step reward of idling at s_next (terminal pricing)

    def __len__(self):
        return self.s.shape[0]


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.rng = rng
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s_next = np.zeros((capacity, state_dim))
        self._h = np.zeros(capacity)
        self._h_next = np.zeros(capacity)
        self._c = np.zeros(capacity)
        self._done = np.zeros(capacity)
        self._r_stuck = np.zeros(capacity)
        self._write = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition, h_next: float, r_stuck: float = 0.0) -> None:
        i = self._write
        self._s[i] = t.s
        self._a[i] = t.a
        self._r[i] = t.r
        self._s_next[i] = t.s_next
        self._h[i] = t.h
        self._h_next[i] = h_next
        self._c[i] = t.c
        self._done[i] = 1.0 if t.done else 0.0
        self._r_stuck[i] = r_stuck
        self._write = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return self.rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int) -> Batch:
        idx = self.sample_indices(batch_size)
        return self.gather(idx)

    def gather(self, idx: np.ndarray) -> Batch:
        return Batch(
            s=self._s[idx].copy(),
            a=self._a[idx].copy(),
            r=self._r[idx].copy(),
            s_next=self._s_next[idx].copy(),
            h=self._h[idx].copy(),
            h_next=self._h_next[idx].copy(),
            c=self._c[idx].copy(),
            done=self._done[idx].copy(),
            r_stuck=self._r_stuck[idx].copy(),
        )
