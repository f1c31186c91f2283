"""Planar quadrotor tracking a circular waypoint sequence.

The 12-dim state stacks the vehicle state [x, xd, z, zd, th, thd] with
the currently tracked waypoint's reference [x, xd, z, zd, th, thd]; only
that next waypoint is observable. Actions are the two motor thrusts
normalised to [0, 1], with 0.5 per motor balancing gravity. The state
constraint keeps the altitude z inside a band.

Physical constants are Crazyflie-class; the tracking reward is a
negated weighted quadratic in the state and action deviations from the
reference.
"""

from __future__ import annotations

import numpy as np

from .base import ControlEnv, EnvSpec

GRAVITY = 9.81
MASS = 0.027  # kg
INERTIA_YY = 1.4e-5  # kg m^2
ARM_LENGTH = 0.0397  # m
DT = 0.02
N_WAYPOINTS = 360
CIRCLE_CENTER = (0.0, 1.0)  # (x, z)
CIRCLE_RADIUS = 1.0
Z_BAND = (0.5, 1.5)
SIM_BOX = (2.0, 3.0)  # |x| <= 2, |z| <= 3

STATE_WEIGHTS = (10.0, 1.0, 10.0, 1.0, 0.2, 0.2)
ACTION_WEIGHTS = (1e-4, 1e-4)

# Static evaluation starts, all hover-feasible.
EVAL_STARTS_XZ = ((1.0, 1.0), (-1.0, 1.0), (0.0, 0.53), (0.0, 1.47))

INIT_RANGES = {
    "x": (-1.5, 1.5),
    "xd": (-1.0, 1.0),
    "z": (0.25, 1.75),
    "zd": (-1.5, 1.5),
    "th": (-0.2, 0.2),
    "thd": (-0.1, 0.1),
}


def _waypoint_positions() -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(N_WAYPOINTS) / N_WAYPOINTS
    return np.column_stack(
        [CIRCLE_CENTER[0] + CIRCLE_RADIUS * np.cos(ang),
         CIRCLE_CENTER[1] + CIRCLE_RADIUS * np.sin(ang)]
    )


class Quadrotor2DEnv(ControlEnv):
    coordinate_names = ("x", "xd", "z", "zd", "th", "thd")

    def __init__(self, dt: float = DT, max_episode_len: int = N_WAYPOINTS):
        self.mass = MASS
        self.inertia = INERTIA_YY
        self.arm = ARM_LENGTH
        self.gravity = GRAVITY
        # Per-motor thrust map: [0, 1] -> [0, m g], so u = 0.5 hovers.
        self.thrust_scale = self.mass * self.gravity
        self.hover_action = np.array([0.5, 0.5])
        self.state_weights = np.asarray(STATE_WEIGHTS, dtype=np.float64)
        self.action_weights = np.asarray(ACTION_WEIGHTS, dtype=np.float64)
        self.waypoints = _waypoint_positions()
        # Reference velocity: consecutive-waypoint difference over one dt.
        nxt = np.roll(self.waypoints, -1, axis=0)
        self.waypoint_vel = (nxt - self.waypoints) / float(dt)
        self.spec = EnvSpec(
            name="quadrotor",
            state_dim=12,
            action_dim=2,
            action_low=(0.0, 0.0),
            action_high=(1.0, 1.0),
            dt=float(dt),
            max_episode_len=int(max_episode_len),
            termination=f"|x| > {SIM_BOX[0]} or |z| > {SIM_BOX[1]}",
        )

    def waypoint_state(self, index: int) -> np.ndarray:
        """Reference block [x, xd, z, zd, th, thd] for waypoint `index`."""
        i = int(index) % N_WAYPOINTS
        p = self.waypoints[i]
        v = self.waypoint_vel[i]
        return np.array([p[0], v[0], p[1], v[1], 0.0, 0.0])

    def nearest_waypoint(self, x: float, z: float) -> int:
        """Index of the closest waypoint; ties resolve to the lowest index.

        Ties are detected up to float roundoff so the exact circle
        centre maps to index 0 deterministically.
        """
        d2 = (self.waypoints[:, 0] - x) ** 2 + (self.waypoints[:, 1] - z) ** 2
        return int(np.argmax(d2 <= d2.min() + 1e-12))

    def waypoint_index(self, s: np.ndarray) -> int:
        """Recover the tracked waypoint index from the reference block."""
        ang = np.arctan2(s[8] - CIRCLE_CENTER[1], s[6] - CIRCLE_CENTER[0])
        return int(np.rint(ang * N_WAYPOINTS / (2.0 * np.pi))) % N_WAYPOINTS

    def sample_initial(self, rng: np.random.Generator) -> np.ndarray:
        phys = np.array([rng.uniform(lo, hi) for lo, hi in INIT_RANGES.values()])
        idx = self.nearest_waypoint(phys[0], phys[2])
        return np.concatenate([phys, self.waypoint_state(idx)])

    def start_state(self, x: float, z: float) -> np.ndarray:
        """Static start at (x, z) with zero rates, used by the evaluation
        protocol."""
        phys = np.array([x, 0.0, z, 0.0, 0.0, 0.0])
        idx = self.nearest_waypoint(x, z)
        return np.concatenate([phys, self.waypoint_state(idx)])

    def dynamics(self, s, a):
        x, xd, z, zd, th, thd = s[:6]
        thrust = a * self.thrust_scale
        total = thrust[0] + thrust[1]
        xdd = total * np.sin(th) / self.mass
        zdd = total * np.cos(th) / self.mass - self.gravity
        thdd = (thrust[1] - thrust[0]) * self.arm / self.inertia
        dt = self.spec.dt
        phys = np.array(
            [x + dt * xd, xd + dt * xdd,
             z + dt * zd, zd + dt * zdd,
             th + dt * thd, thd + dt * thdd]
        )
        # The waypoint cursor advances exactly one index, counter-clockwise.
        nxt = self.waypoint_state(self.waypoint_index(s) + 1)
        return np.concatenate([phys, nxt])

    def constraint(self, s):
        s = np.asarray(s, dtype=np.float64)
        z = s[..., 2]
        return np.maximum(Z_BAND[0] - z, z - Z_BAND[1])

    def reward(self, s, a):
        ds = s[:6] - s[6:12]
        da = np.asarray(a, dtype=np.float64) - self.hover_action
        return -float(np.sum(self.state_weights * ds * ds)
                      + np.sum(self.action_weights * da * da))

    def terminal(self, s) -> bool:
        return bool(abs(s[0]) > SIM_BOX[0] or abs(s[2]) > SIM_BOX[1])

    def plane_states(self, name0, pts0, name1, pts1, fixed):
        """Embed an (x, z)-style plane into full 12-dim states.

        All vehicle coordinates not on the plane must appear in `fixed`;
        each sample's waypoint is the nearest one to its (x, z) location.
        """
        cols = {name0: np.asarray(pts0, float), name1: np.asarray(pts1, float)}
        for name, value in fixed.items():
            if name not in self.coordinate_names:
                raise ValueError(f"unknown coordinate {name!r}")
            cols[name] = np.full(len(pts0), float(value))
        missing = [n for n in self.coordinate_names if n not in cols]
        if missing:
            raise ValueError(f"slice leaves coordinates unset: {missing}")
        phys = np.column_stack([cols[n] for n in self.coordinate_names])
        states = np.empty((len(pts0), 12))
        states[:, :6] = phys
        for i in range(len(pts0)):
            idx = self.nearest_waypoint(phys[i, 0], phys[i, 2])
            states[i, 6:] = self.waypoint_state(idx)
        return states
