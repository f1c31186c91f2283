"""Environment abstraction and the transition record.

Environments here are immutable parameter bundles: stepping is a pure
function of (state, action), so the same instance can be stepped from
many threads on independent state values. Episode bookkeeping (step
counts, resets) belongs to the rollout loop, not the environment.

The cost signal is derived, never stored independently: c(s) = 1 exactly
when the state constraint h(s) <= 0 is violated.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..exceptions import IntegrationOverflowError
from ..validation import check_action, check_state


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an environment.

    action_low/high are per-coordinate bounds applied by clamping, dt is
    the integrator step in seconds, max_episode_len the rollout horizon
    in steps, and termination a human-readable predicate description.
    """

    name: str
    state_dim: int
    action_dim: int
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]
    dt: float
    max_episode_len: int
    termination: str

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_episode_len <= 0:
            raise ValueError("max_episode_len must be positive")
        lo = np.asarray(self.action_low, dtype=np.float64)
        hi = np.asarray(self.action_high, dtype=np.float64)
        if lo.shape != (self.action_dim,) or hi.shape != (self.action_dim,):
            raise ValueError("action bounds must match action_dim")
        if not np.all(lo < hi):
            raise ValueError("action_low must be elementwise below action_high")


@dataclass(frozen=True)
class Transition:
    """One environment step as stored in the replay buffer.

    h is the constraint value at s (not s_next); c is its 0/1 violation
    indicator; done marks a constraint-relevant terminal (the successor
    left the environment's bounding region), never a timeout.
    """

    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    h: float
    c: int
    done: bool


class ControlEnv(ABC):
    """Deterministic continuous-state environment with a state constraint."""

    spec: EnvSpec

    @abstractmethod
    def sample_initial(self, rng: np.random.Generator) -> np.ndarray:
        """Draw an initial state from the environment's start distribution."""

    @abstractmethod
    def dynamics(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        """One explicit-Euler step of duration spec.dt; a is already clamped."""

    @abstractmethod
    def constraint(self, s: np.ndarray) -> np.ndarray | float:
        """State constraint h(s); h <= 0 means the state is safe.

        Accepts a single state (state_dim,) or a batch (n, state_dim)
        and returns a scalar / (n,) array correspondingly.
        """

    @abstractmethod
    def reward(self, s: np.ndarray, a: np.ndarray) -> float:
        """Reward of taking (clamped) action a in state s."""

    @abstractmethod
    def terminal(self, s: np.ndarray) -> bool:
        """True when s has left the environment's bounding region."""

    @property
    def neutral_action(self) -> np.ndarray:
        """Action holding the actuator at its midpoint (hover/zero).

        Used to price a terminal state as if the system were stuck
        there: its one-step reward under the neutral action, paid
        forever, is the discounted continuation a learner should see
        instead of a free episode end.
        """
        lo = np.asarray(self.spec.action_low)
        hi = np.asarray(self.spec.action_high)
        return (lo + hi) / 2.0

    def terminal_reward(self, S: np.ndarray) -> np.ndarray:
        """Per-step reward of being stuck at each state in S."""
        S = np.atleast_2d(np.asarray(S, dtype=np.float64))
        a = self.neutral_action
        return np.array([self.reward(S[i], a) for i in range(S.shape[0])])

    def clamp_action(self, a: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.spec.action_low)
        hi = np.asarray(self.spec.action_high)
        return np.clip(np.asarray(a, dtype=np.float64), lo, hi)

    def step(self, s, a) -> Transition:
        """Pure transition: clamp, integrate one dt, fill the record.

        Identical inputs give identical outputs. Raises
        IntegrationOverflowError if integration leaves the float range.
        """
        s = check_state(s, self.spec.state_dim)
        a = self.clamp_action(check_action(a, self.spec.action_dim))
        s_next = self.dynamics(s, a)
        if not np.all(np.isfinite(s_next)):
            raise IntegrationOverflowError(
                f"{self.spec.name}: non-finite state after integration"
            )
        h = float(self.constraint(s))
        r = float(self.reward(s, a))
        if not np.isfinite(r) or not np.isfinite(h):
            raise IntegrationOverflowError(
                f"{self.spec.name}: non-finite reward or constraint value"
            )
        return Transition(
            s=s,
            a=a,
            r=r,
            s_next=s_next,
            h=h,
            c=int(h > 0.0),
            done=bool(self.terminal(s_next)),
        )

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Alias for sample_initial; deterministic given the generator state."""
        return self.sample_initial(rng)
