"""Run configuration: TOML files, dotted-path overrides, validation.

A run config has top-level keys (seed, out_dir, algorithm) plus
[env], [train], [constraint], [oracle] and [eval] tables. Unknown keys
are rejected so typos fail loudly before a run starts.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields

from . import minitoml
from .constraints import ALGORITHM_KINDS
from .envs import ENV_REGISTRY
from .exceptions import ConfigError


@dataclass
class EnvConfig:
    name: str = "double_integrator"
    # Optional constructor overrides; empty means environment defaults.
    params: dict = field(default_factory=dict)


@dataclass
class TrainConfig:
    total_steps: int = 100_000
    gamma: float = 0.99
    tau: float = 0.005
    hidden_width: int = 256
    batch_size: int = 512
    buffer_capacity: int = 50_000
    warmup_steps: int = 1_000
    actor_interval: int = 4
    multiplier_interval: int = 12
    critic_lr: list = field(default_factory=lambda: [1e-4, 1e-6])
    actor_lr: list = field(default_factory=lambda: [2e-5, 1e-6])
    multiplier_lr: list = field(default_factory=lambda: [6e-7, 1e-7])
    lambda_max: float = 100.0
    grad_clip: float = 10.0
    explore_std: list = field(default_factory=lambda: [0.1, 0.01])
    eval_interval: int = 5_000
    eval_episodes: int = 20
    multiplier_width: int = 0  # 0 means: same as hidden_width
    multiplier_warmup: int = 0  # steps before dual ascent begins
    rollout_mode: str = "inline"


@dataclass
class ConstraintConfig:
    mu: float = 0.1
    sigma: float = 0.1
    n: int = 2
    k: float = 1.0
    eta_d: float = 0.1
    rho: float = 0.5
    eta: float = 0.1


@dataclass
class OracleGridConfig:
    counts: list = field(default_factory=lambda: [201, 201])
    lows: list = field(default_factory=lambda: [-5.0, -5.0])
    highs: list = field(default_factory=lambda: [5.0, 5.0])
    gamma: float = 0.99
    action_samples: int = 21
    tol: float = 1e-6
    max_sweeps: int = 5_000


@dataclass
class EvalProtocolConfig:
    episodes: int = 100


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "out/run"
    algorithm: str = "rcrl"
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    constraint: ConstraintConfig = field(default_factory=ConstraintConfig)
    oracle: OracleGridConfig = field(default_factory=OracleGridConfig)
    eval: EvalProtocolConfig = field(default_factory=EvalProtocolConfig)


_SECTION_TYPES = {
    "env": EnvConfig,
    "train": TrainConfig,
    "constraint": ConstraintConfig,
    "oracle": OracleGridConfig,
    "eval": EvalProtocolConfig,
}


def _build_section(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    if cls is EnvConfig:
        name = data.get("name", "double_integrator")
        params = {k: v for k, v in data.items() if k != "name"}
        return EnvConfig(name=name, params=params)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        body = data.pop(name, {})
        if not isinstance(body, dict):
            raise ConfigError(f"[{name}] must be a table")
        sections[name] = _build_section(cls, body, name)
    top_known = {"seed", "out_dir", "algorithm"}
    unknown = set(data) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    cfg = RunConfig(
        seed=data.get("seed", 0),
        out_dir=data.get("out_dir", "out/run"),
        algorithm=data.get("algorithm", "rcrl"),
        **sections,
    )
    validate_config(cfg)
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    data = {
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
        "algorithm": cfg.algorithm,
        "env": {"name": cfg.env.name, **cfg.env.params},
        "train": asdict(cfg.train),
        "constraint": asdict(cfg.constraint),
        "oracle": asdict(cfg.oracle),
        "eval": asdict(cfg.eval),
    }
    return data


def load_config(path) -> RunConfig:
    try:
        raw = minitoml.load(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw)


def dump_config(cfg: RunConfig) -> str:
    return minitoml.dumps(config_to_dict(cfg))


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply `a.b.c=value` assignments to a raw config dict.

    Values are parsed with the TOML value grammar, so `seed=7`,
    `train.critic_lr=[3e-4, 3e-5]` and `env.name="quadrotor"` all work.
    """
    out = dict(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        path, _, raw_value = item.partition("=")
        keys = [k.strip() for k in path.strip().split(".")]
        if not all(keys):
            raise ConfigError(f"override {item!r} has an empty path segment")
        try:
            value = minitoml.parse_value(raw_value.strip())
        except ValueError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from exc
        node = out
        for k in keys[:-1]:
            nxt = node.get(k)
            if not isinstance(nxt, dict):
                nxt = {}
                node[k] = nxt
            node = nxt
        node[keys[-1]] = value
    return out


def validate_config(cfg: RunConfig) -> None:
    if cfg.algorithm not in ALGORITHM_KINDS:
        raise ConfigError(
            f"algorithm: unknown value {cfg.algorithm!r}; "
            f"known: {sorted(ALGORITHM_KINDS)}"
        )
    if cfg.env.name not in ENV_REGISTRY and cfg.env.name != "constant_h":
        raise ConfigError(
            f"env.name: unknown environment {cfg.env.name!r}; "
            f"known: {sorted(ENV_REGISTRY) + ['constant_h']}"
        )
    t = cfg.train
    for name in ("total_steps", "hidden_width", "batch_size", "buffer_capacity",
                 "eval_interval", "eval_episodes"):
        if getattr(t, name) < 0 or (name != "total_steps" and getattr(t, name) == 0):
            raise ConfigError(f"train.{name}: must be positive")
    if t.actor_interval < 1 or t.multiplier_interval < 1:
        raise ConfigError("train.actor_interval/multiplier_interval: must be >= 1")
    for name in ("critic_lr", "actor_lr", "multiplier_lr", "explore_std"):
        pair = getattr(t, name)
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ConfigError(f"train.{name}: expected [start, end]")
    for k_probe in (0, 1):
        frac = float(k_probe)
        lr = [p[0] + (p[1] - p[0]) * frac
              for p in (t.critic_lr, t.actor_lr, t.multiplier_lr)]
        if not (lr[0] > lr[1] > lr[2]):
            raise ConfigError(
                "train learning rates: ordering critic > actor > multiplier "
                f"violated at anneal fraction {frac:g} "
                f"(critic={lr[0]:g}, actor={lr[1]:g}, multiplier={lr[2]:g})"
            )
    if not (0.0 < t.gamma < 1.0):
        raise ConfigError("train.gamma: must lie in (0, 1)")
    if not (0.0 < t.tau <= 1.0):
        raise ConfigError("train.tau: must lie in (0, 1]")
    o = cfg.oracle
    if not (0.0 < o.gamma < 1.0):
        raise ConfigError("oracle.gamma: must lie in (0, 1)")
    if o.tol <= 0:
        raise ConfigError("oracle.tol: must be positive")
    if len(o.counts) != len(o.lows) or len(o.counts) != len(o.highs):
        raise ConfigError("oracle grid: counts/lows/highs lengths differ")
    if cfg.eval.episodes < 1:
        raise ConfigError("eval.episodes: must be >= 1")


def estimator_kwargs(cfg: RunConfig) -> dict:
    """Translate a run config into ConstrainedActorCritic parameters."""
    t = cfg.train
    c = cfg.constraint
    return dict(
        algorithm=cfg.algorithm,
        total_steps=t.total_steps,
        gamma=t.gamma,
        tau=t.tau,
        hidden_width=t.hidden_width,
        batch_size=t.batch_size,
        buffer_capacity=t.buffer_capacity,
        warmup_steps=t.warmup_steps,
        actor_interval=t.actor_interval,
        multiplier_interval=t.multiplier_interval,
        critic_lr=tuple(t.critic_lr),
        actor_lr=tuple(t.actor_lr),
        multiplier_lr=tuple(t.multiplier_lr),
        lambda_max=t.lambda_max,
        grad_clip=t.grad_clip,
        explore_std=tuple(t.explore_std),
        eval_interval=t.eval_interval,
        eval_episodes=t.eval_episodes,
        multiplier_width=(t.multiplier_width or None),
        multiplier_warmup=t.multiplier_warmup,
        mu=c.mu,
        si_sigma=c.sigma,
        si_n=c.n,
        si_k=c.k,
        si_eta_d=c.eta_d,
        rho=c.rho,
        cost_threshold=c.eta,
        seed=cfg.seed,
        rollout_mode=t.rollout_mode,
    )
