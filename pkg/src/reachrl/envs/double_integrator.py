"""Double integrator benchmark.

State s = (x1, x2) with dynamics x1' = x2, x2' = a under |a| <= a_max,
integrated by explicit Euler. The state constraint is the box
||s||_inf <= bound; the reward is the negated regulation cost
-(||s||^2 + a^2), so the optimum parks the system at the origin.

Episodes terminate on leaving a simulation box slightly larger than the
constraint box (mirroring the altitude-band/flight-box split of the
quadrotor task): trajectories that violate the constraint keep running
and record growing constraint values before the cut, which is what
gives a learned safety critic a resolvable violation signal instead of
a vanishing one-step overshoot.
"""

from __future__ import annotations

import numpy as np

from .base import ControlEnv, EnvSpec

A_MAX = 0.5
BOUND = 5.0
SIM_BOUND = 6.0
DT = 0.1
MAX_EPISODE_LEN = 200


class DoubleIntegratorEnv(ControlEnv):
    def __init__(
        self,
        a_max: float = A_MAX,
        bound: float = BOUND,
        sim_bound: float = SIM_BOUND,
        dt: float = DT,
        max_episode_len: int = MAX_EPISODE_LEN,
    ):
        if a_max <= 0 or bound <= 0:
            raise ValueError("a_max and bound must be positive")
        if sim_bound < bound:
            raise ValueError("sim_bound must not be smaller than bound")
        self.a_max = float(a_max)
        self.bound = float(bound)
        self.sim_bound = float(sim_bound)
        self.spec = EnvSpec(
            name="double_integrator",
            state_dim=2,
            action_dim=1,
            action_low=(-self.a_max,),
            action_high=(self.a_max,),
            dt=float(dt),
            max_episode_len=int(max_episode_len),
            termination=f"||s||_inf > {sim_bound}",
        )

    # Coordinate names accepted by slice specifications.
    coordinate_names = ("x1", "x2")

    def sample_initial(self, rng: np.random.Generator) -> np.ndarray:
        # d0 = uniform over the constraint box.
        return rng.uniform(-self.bound, self.bound, size=2)

    def dynamics(self, s, a):
        return np.array(
            [s[0] + self.spec.dt * s[1], s[1] + self.spec.dt * a[0]],
            dtype=np.float64,
        )

    def dynamics_batch(self, S: np.ndarray, A) -> np.ndarray:
        """Euler step of a whole (n, 2) batch; A is a shared action or a
        per-row (n, 1) array."""
        A = np.asarray(A, dtype=np.float64)
        a = A[:, 0] if A.ndim == 2 else A.reshape(-1)[0]
        out = np.empty_like(S, dtype=np.float64)
        out[:, 0] = S[:, 0] + self.spec.dt * S[:, 1]
        out[:, 1] = S[:, 1] + self.spec.dt * a
        return out

    def constraint(self, s):
        s = np.asarray(s, dtype=np.float64)
        return np.max(np.abs(s), axis=-1) - self.bound

    def reward(self, s, a):
        return -(float(s[0]) ** 2 + float(s[1]) ** 2 + float(a[0]) ** 2)

    def terminal(self, s) -> bool:
        return bool(np.max(np.abs(s)) > self.sim_bound)

    def plane_states(self, name0, pts0, name1, pts1, fixed):
        """Embed plane coordinates into full states (trivially: the state
        space is the plane)."""
        if (name0, name1) not in {("x1", "x2"), ("x2", "x1")}:
            raise ValueError("double integrator axes must be x1 and x2")
        if fixed:
            raise ValueError(f"no coordinates left to fix, got {sorted(fixed)}")
        cols = {name0: pts0, name1: pts1}
        return np.column_stack([cols["x1"], cols["x2"]])


def braking_feasible(states: np.ndarray, a_max: float = A_MAX, bound: float = BOUND) -> np.ndarray:
    """Closed-form membership test for the largest controlled-invariant set.

    A state can stay inside the box forever iff it is inside and the
    braking distance x2^2 / (2 a_max) fits before the wall the velocity
    points at. This is the continuous-time answer and serves as an
    oracle independent of any value iteration.
    """
    S = np.atleast_2d(np.asarray(states, dtype=np.float64))
    x1, x2 = S[:, 0], S[:, 1]
    inside = np.max(np.abs(S), axis=1) <= bound
    brake = x2 * x2 / (2.0 * a_max)
    ok_right = (x2 <= 0.0) | (x1 + brake <= bound)
    ok_left = (x2 >= 0.0) | (-x1 + brake <= bound)
    out = inside & ok_right & ok_left
    return out if np.asarray(states).ndim > 1 else out[0]
