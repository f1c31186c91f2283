"""Pluggable constraint formulations for the constrained actor-critic.

Each kind defines (a) the scalar functional whose nonpositivity means
"constraint satisfied", (b) how the policy/multiplier losses see it,
and (c) what shape of Lagrange multiplier it pairs with:

  reachability     worst future constraint value, learned recursively;
                   statewise multiplier network
  cumulative cost  discounted cost return above a threshold; scalar
                   multiplier
  barrier (CBF)    hdot + mu * h from the sampled transition; statewise
  safety index     energy decrease condition on phi = sigma - (-h)^n
                   + k * hdot; statewise
  reward shaping   no constraint at all, the reward is penalised instead

The barrier and safety-index values are pure functions of
(h(s), h(s_next), dt, hyperparameters): hdot is the one-step finite
difference, used for both endpoints of a transition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Reachability:
    pass


@dataclass(frozen=True)
class CumulativeCost:
    threshold: float = 0.1

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")


@dataclass(frozen=True)
class Cbf:
    mu: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.mu < 1.0):
            raise ValueError("mu must lie in (0, 1)")


@dataclass(frozen=True)
class SafetyIndex:
    sigma: float = 0.1
    n: int = 2
    k: float = 1.0
    eta_d: float = 0.1

    def __post_init__(self):
        if self.n < 1 or self.k <= 0 or self.eta_d < 0:
            raise ValueError("need n >= 1, k > 0, eta_d >= 0")


@dataclass(frozen=True)
class RewardShaping:
    rho: float = 0.5

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")


ConstraintKind = Union[Reachability, CumulativeCost, Cbf, SafetyIndex, RewardShaping]

_KIND_NAMES = {
    "reachability": Reachability,
    "cumulative-cost": CumulativeCost,
    "cbf": Cbf,
    "safety-index": SafetyIndex,
    "reward-shaping": RewardShaping,
}

# CLI/algorithm aliases.
ALGORITHM_KINDS = {
    "rcrl": "reachability",
    "lagrangian": "cumulative-cost",
    "cbf": "cbf",
    "si": "safety-index",
    "reward-shaping": "reward-shaping",
}


def kind_from_name(name: str, **hyper) -> ConstraintKind:
    try:
        cls = _KIND_NAMES[name]
    except KeyError:
        raise ValueError(
            f"unknown constraint kind {name!r}; known: {sorted(_KIND_NAMES)}"
        ) from None
    return cls(**hyper)


def multiplier_shape(kind: ConstraintKind) -> str:
    """'statewise' | 'scalar' | 'none' — how the dual variable looks."""
    if isinstance(kind, (Reachability, Cbf, SafetyIndex)):
        return "statewise"
    if isinstance(kind, CumulativeCost):
        return "scalar"
    return "none"


def hdot(h: np.ndarray, h_next: np.ndarray, dt: float) -> np.ndarray:
    """Finite-difference constraint rate over one step."""
    return (np.asarray(h_next) - np.asarray(h)) / dt


def cbf_value(kind: Cbf, h, h_next, dt) -> np.ndarray:
    return hdot(h, h_next, dt) + kind.mu * np.asarray(h)


def si_phi(kind: SafetyIndex, h, hd) -> np.ndarray:
    return kind.sigma - (-np.asarray(h)) ** kind.n + kind.k * np.asarray(hd)


def si_value(kind: SafetyIndex, h, h_next, dt) -> np.ndarray:
    hd = hdot(h, h_next, dt)
    phi = si_phi(kind, h, hd)
    phi_next = si_phi(kind, h_next, hd)
    return phi_next - np.maximum(phi - kind.eta_d, 0.0)


def direct_target(kind: ConstraintKind, h, h_next, dt) -> np.ndarray:
    """Regression target for the non-recursive constraint critics."""
    if isinstance(kind, Cbf):
        return cbf_value(kind, h, h_next, dt)
    if isinstance(kind, SafetyIndex):
        return si_value(kind, h, h_next, dt)
    raise TypeError(f"{type(kind).__name__} has no direct transition target")


def shape_reward(kind: RewardShaping, r, h):
    """Penalised reward r - rho * h; only meaningful for reward shaping."""
    if not isinstance(kind, RewardShaping):
        raise TypeError("shape_reward applies to the reward-shaping kind only")
    return np.asarray(r) - kind.rho * np.asarray(h)


def constraint_value(kind: ConstraintKind, transition, nets, env) -> float:
    """Scalar constraint functional for one transition; <= 0 is satisfied.

    The barrier and safety-index kinds never touch `nets` (they are
    pure functions of the transition), the reachability and cumulative
    cost kinds evaluate the learned critic at (s, pi(s)), and reward
    shaping has no constraint (returns 0).
    """
    if isinstance(kind, RewardShaping):
        return 0.0
    h = float(transition.h)
    if isinstance(kind, (Cbf, SafetyIndex)):
        h_next = float(env.constraint(transition.s_next))
        return float(direct_target(kind, h, h_next, env.spec.dt))
    S = transition.s[None, :]
    g = float(nets.g_value(S, nets.act(S))[0])
    if isinstance(kind, CumulativeCost):
        return g - kind.threshold
    return g
