from .base import ControlEnv, EnvSpec, Transition
from .double_integrator import DoubleIntegratorEnv, braking_feasible
from .quadrotor import Quadrotor2DEnv
from .toy import ConstantConstraintEnv

ENV_REGISTRY = {
    "double_integrator": DoubleIntegratorEnv,
    "quadrotor": Quadrotor2DEnv,
}


def make_env(name: str, **kwargs) -> ControlEnv:
    """Instantiate a registered environment by name.

    The toy constant-constraint environment is addressed as
    "constant_h" and wraps double-integrator dynamics.
    """
    if name == "constant_h":
        value = kwargs.pop("value", -1.0)
        return ConstantConstraintEnv(DoubleIntegratorEnv(**kwargs), value=value)
    try:
        cls = ENV_REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown environment {name!r}; known: {sorted(ENV_REGISTRY)} + ['constant_h']"
        ) from None
    return cls(**kwargs)


__all__ = [
    "ControlEnv",
    "EnvSpec",
    "Transition",
    "DoubleIntegratorEnv",
    "Quadrotor2DEnv",
    "ConstantConstraintEnv",
    "braking_feasible",
    "make_env",
    "ENV_REGISTRY",
]
