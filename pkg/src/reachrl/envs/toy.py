"""Toy environments for solver tests and fixed-point sanity checks."""

from __future__ import annotations

import numpy as np

from .base import ControlEnv, EnvSpec


class ConstantConstraintEnv(ControlEnv):
    """Wraps another environment's dynamics under a constant h(s) = value.

    With a constant constraint the safety value iteration has the
    closed-form fixed point V = value everywhere, which pins down the
    solver's fixed-point arithmetic independent of any dynamics.
    """

    coordinate_names = ("x1", "x2")

    def __init__(self, base: ControlEnv, value: float = -1.0):
        self.base = base
        self.value = float(value)
        self.spec = EnvSpec(
            name=f"constant_h({value})",
            state_dim=base.spec.state_dim,
            action_dim=base.spec.action_dim,
            action_low=base.spec.action_low,
            action_high=base.spec.action_high,
            dt=base.spec.dt,
            max_episode_len=base.spec.max_episode_len,
            termination="never",
        )

    def sample_initial(self, rng):
        return self.base.sample_initial(rng)

    def dynamics(self, s, a):
        return self.base.dynamics(s, a)

    def dynamics_batch(self, S, A):
        fast = getattr(self.base, "dynamics_batch", None)
        if fast is None:
            raise AttributeError("base environment has no dynamics_batch")
        return fast(S, A)

    def constraint(self, s):
        s = np.asarray(s, dtype=np.float64)
        return np.full(s.shape[:-1], self.value) if s.ndim > 1 else self.value

    def reward(self, s, a):
        return 0.0

    def terminal(self, s) -> bool:
        return False
