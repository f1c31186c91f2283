"""Reachability-constrained reinforcement learning toolkit.

Two fit-shaped learners form the core API: SafetyValueIteration (exact
feasible sets for low-dimensional systems by grid dynamic programming)
and ConstrainedActorCritic (statewise-Lagrangian actor-critic training
with pluggable constraint formulations), plus the benchmark
environments and a command-line front end.
"""

__version__ = "0.1.0"

from .envs import (
    ConstantConstraintEnv,
    ControlEnv,
    DoubleIntegratorEnv,
    EnvSpec,
    Quadrotor2DEnv,
    Transition,
    braking_feasible,
    make_env,
)
from .grids import GridSpec, ValueGrid
from .oracle import (
    PolicySafetyEvaluation,
    SafetyValueIteration,
    analytic_kernel_mask,
    contraction_check,
    kernel_agreement,
    mask_iou,
)
from .trainer import ConstrainedActorCritic, SliceSpec, evaluate_policy

__all__ = [
    "ConstrainedActorCritic",
    "SliceSpec",
    "evaluate_policy",
    "__version__",
    "ControlEnv",
    "EnvSpec",
    "Transition",
    "DoubleIntegratorEnv",
    "Quadrotor2DEnv",
    "ConstantConstraintEnv",
    "braking_feasible",
    "make_env",
    "GridSpec",
    "ValueGrid",
    "SafetyValueIteration",
    "PolicySafetyEvaluation",
    "analytic_kernel_mask",
    "contraction_check",
    "kernel_agreement",
    "mask_iou",
]
