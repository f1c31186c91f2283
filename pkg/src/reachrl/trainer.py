"""Off-policy constrained actor-critic trainer.

One learner owns four parameter vectors (reward critic, constraint
critic, actor, multiplier) updated on three timescales: critics every
environment step with the fastest learning rate, the actor every
`actor_interval` steps at an intermediate rate, the multiplier every
`multiplier_interval` steps at the slowest rate, with Polyak-averaged
target copies of both critics. Rollout exploration adds decaying
Gaussian noise to the deterministic actor.

Every random draw flows from one 64-bit seed through spawned
SeedSequence children (initialisation, resets, exploration, replay
sampling, evaluation), so two runs with identical configuration produce
bit-identical artifacts.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import qmc
from sklearn.base import BaseEstimator

from .constraints import (
    ALGORITHM_KINDS,
    Cbf,
    CumulativeCost,
    Reachability,
    RewardShaping,
    SafetyIndex,
    multiplier_shape,
)
from .envs.base import ControlEnv
from .envs.double_integrator import DoubleIntegratorEnv, braking_feasible
from .envs.quadrotor import EVAL_STARTS_XZ
from .grids import GridSpec, ValueGrid
from .nets import (
    AdamState,
    MlpSpec,
    ProjectionSpec,
    adam_step,
    forward,
    load_checkpoint,
    polyak_update,
    save_checkpoint,
)
from .replay import ReplayBuffer
from .updates import (
    NetBundle,
    actor_update,
    coupled_critic_updates,
    multiplier_update,
)
from .validation import check_fitted, check_states

METRICS_HEADER = (
    "step,avg_return,violation_rate,q_loss,qh_loss,actor_loss,"
    "mean_lambda_feasible,mean_lambda_infeasible"
)


@dataclass(frozen=True)
class LinearSchedule:
    """Linear interpolation from start to end over `steps`, then flat."""

    start: float
    end: float
    steps: int

    def __call__(self, k: int) -> float:
        if self.steps <= 0:
            return self.end
        frac = min(max(k, 0) / self.steps, 1.0)
        return self.start + (self.end - self.start) * frac


def validate_timescales(critic: LinearSchedule, actor: LinearSchedule,
                        mult: LinearSchedule, total_steps: int) -> None:
    """Require critic > actor > multiplier rate at every step.

    All three schedules are piecewise linear with knees at their own
    anneal ends, so checking the knee set and both endpoints covers
    every k.
    """
    knees = sorted({0, critic.steps, actor.steps, mult.steps, total_steps})
    for k in knees:
        if not (critic(k) > actor(k) > mult(k)):
            raise ValueError(
                f"learning-rate ordering violated at step {k}: "
                f"critic={critic(k):g} actor={actor(k):g} multiplier={mult(k):g}"
            )


@dataclass(frozen=True)
class SliceSpec:
    """A 2-D plane through the state space for constraint-map export.

    `axes` name the plotted coordinates, `fixed` pins every remaining
    vehicle coordinate; environment-specific rules (e.g. waypoint
    assignment) fill the rest.
    """

    axes: tuple[str, str]
    lows: tuple[float, float]
    highs: tuple[float, float]
    counts: tuple[int, int]
    fixed: dict

    def grid(self) -> GridSpec:
        return GridSpec(lows=self.lows, highs=self.highs, counts=self.counts)


def default_slice(env: ControlEnv, fixed: dict | None = None,
                  counts: tuple[int, int] = (101, 101)) -> SliceSpec:
    """The conventional plane for each benchmark: the full state space
    for the double integrator, the altitude plane for the quadrotor."""
    if env.spec.name == "quadrotor":
        fixed = dict(fixed or {})
        for name in ("xd", "th", "thd"):
            fixed.setdefault(name, 0.0)
        fixed.setdefault("zd", 0.0)
        return SliceSpec(axes=("x", "z"), lows=(-1.5, 0.5), highs=(1.5, 1.5),
                         counts=counts, fixed=fixed)
    return SliceSpec(axes=("x1", "x2"), lows=(-5.0, -5.0), highs=(5.0, 5.0),
                     counts=counts, fixed=dict(fixed or {}))


class _Rollout:
    """Sequential experience generator: owns episode state and rngs."""

    def __init__(self, env: ControlEnv, bundle: NetBundle,
                 reset_rng: np.random.Generator,
                 noise_rng: np.random.Generator,
                 noise: LinearSchedule):
        self.env = env
        self.bundle = bundle
        self.reset_rng = reset_rng
        self.noise_rng = noise_rng
        self.noise = noise
        self.state = env.reset(reset_rng)
        self.ep_len = 0

    def step(self, k: int):
        a = self.bundle.act(self.state[None])[0]
        a = a + self.noise(k) * self.noise_rng.standard_normal(a.shape)
        t = self.env.step(self.state, a)
        h_next = float(self.env.constraint(t.s_next))
        r_stuck = float(self.env.terminal_reward(t.s_next)[0]) if t.done else 0.0
        if t.done or self.ep_len + 1 >= self.env.spec.max_episode_len:
            self.state = self.env.reset(self.reset_rng)
            self.ep_len = 0
        else:
            self.state = t.s_next
            self.ep_len += 1
        return t, h_next, r_stuck


class _QueuedRollout:
    """The same generator behind a bounded queue on a worker thread.

    The learner requests exactly one transition per iteration and the
    worker produces exactly one per request (strict alternation), so the
    transition stream — and therefore the whole run — is identical to
    the inline mode.
    """

    def __init__(self, inner: _Rollout):
        self._inner = inner
        self._requests: queue.Queue = queue.Queue(maxsize=1)
        self._results: queue.Queue = queue.Queue(maxsize=1)
        self._thread = threading.Thread(target=self._work, daemon=True)
        self._thread.start()

    def _work(self):
        while True:
            k = self._requests.get()
            if k is None:
                return
            self._results.put(self._inner.step(k))

    def step(self, k: int):
        self._requests.put(k)
        return self._results.get()

    def close(self):
        self._requests.put(None)
        self._thread.join(timeout=5.0)


def run_episode(env: ControlEnv, bundle: NetBundle, s0: np.ndarray,
                max_len: int | None = None):
    """Deterministic rollout; returns (return, cost_rate, violated)."""
    max_len = max_len or env.spec.max_episode_len
    s = np.asarray(s0, dtype=np.float64)
    total_r = 0.0
    costs = 0
    steps = 0
    for _ in range(max_len):
        a = bundle.act(s[None])[0]
        t = env.step(s, a)
        total_r += t.r
        costs += t.c
        steps += 1
        if t.done:
            # Count the terminal successor's violation as well.
            costs += int(env.constraint(t.s_next) > 0)
            break
        s = t.s_next
    return total_r, costs / max(steps, 1), costs > 0


def feasible_starts(env: ControlEnv, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from the double integrator's closed-form kernel."""
    out = np.empty((n, 2))
    got = 0
    while got < n:
        cand = rng.uniform(-5.0, 5.0, size=(4 * (n - got), 2))
        good = cand[braking_feasible(cand)]
        take = min(len(good), n - got)
        out[got:got + take] = good[:take]
        got += take
    return out


def probe_states(n: int = 1000):
    """Fixed quasi-random probe sets on the double integrator's box.

    Returns (deep_feasible, infeasible): `deep_feasible` points stay in
    the closed-form kernel under +-0.1 coordinate shifts (two grid cells
    of the 201-node reference grid); `infeasible` points are outside it.
    """
    sampler = qmc.Halton(d=2, scramble=False)
    pts = qmc.scale(sampler.random(40 * n), [-5, -5], [5, 5])
    feas = braking_feasible(pts)
    deep = feas.copy()
    for dx in (-0.1, 0.1):
        for axis in (0, 1):
            shifted = pts.copy()
            shifted[:, axis] += dx
            deep &= braking_feasible(shifted)
    deep_pts = pts[deep][:n]
    inf_pts = pts[~feas][:n]
    if len(deep_pts) < n or len(inf_pts) < n:
        raise RuntimeError("probe sampling exhausted its candidate pool")
    return deep_pts, inf_pts


class ConstrainedActorCritic(BaseEstimator):
    """Reachability/energy/cost-constrained deterministic actor-critic.

    fit(env) trains on the given environment; predict(X) maps states to
    actions; constraint_margin(X) evaluates the learned constraint
    functional at (s, pi(s)), whose sub-zero set is the learned feasible
    set. Set `metrics_path` / `checkpoint_path` to emit artifacts.
    """

    def __init__(self, algorithm: str = "rcrl", total_steps: int = 100_000,
                 gamma: float = 0.99, tau: float = 0.005,
                 hidden_width: int = 256, batch_size: int = 512,
                 buffer_capacity: int = 50_000, warmup_steps: int = 1_000,
                 actor_interval: int = 4, multiplier_interval: int = 12,
                 critic_lr: tuple = (1e-4, 1e-6),
                 actor_lr: tuple = (2e-5, 1e-6),
                 multiplier_lr: tuple = (6e-7, 1e-7),
                 lambda_max: float = 100.0, grad_clip: float = 10.0,
                 explore_std: tuple = (0.1, 0.01),
                 eval_interval: int = 5_000, eval_episodes: int = 20,
                 mu: float = 0.1, si_sigma: float = 0.1, si_n: int = 2,
                 si_k: float = 1.0, si_eta_d: float = 0.1, rho: float = 0.5,
                 cost_threshold: float = 0.1, multiplier_init_bias: float = -2.0,
                 multiplier_width: int | None = None,
                 multiplier_warmup: int = 0, seed: int = 0,
                 metrics_path=None, checkpoint_path=None,
                 rollout_mode: str = "inline"):
        self.algorithm = algorithm
        self.total_steps = total_steps
        self.gamma = gamma
        self.tau = tau
        self.hidden_width = hidden_width
        self.batch_size = batch_size
        self.buffer_capacity = buffer_capacity
        self.warmup_steps = warmup_steps
        self.actor_interval = actor_interval
        self.multiplier_interval = multiplier_interval
        self.critic_lr = critic_lr
        self.actor_lr = actor_lr
        self.multiplier_lr = multiplier_lr
        self.lambda_max = lambda_max
        self.grad_clip = grad_clip
        self.explore_std = explore_std
        self.eval_interval = eval_interval
        self.eval_episodes = eval_episodes
        self.mu = mu
        self.si_sigma = si_sigma
        self.si_n = si_n
        self.si_k = si_k
        self.si_eta_d = si_eta_d
        self.rho = rho
        self.cost_threshold = cost_threshold
        self.multiplier_init_bias = multiplier_init_bias
        self.multiplier_width = multiplier_width
        self.multiplier_warmup = multiplier_warmup
        self.seed = seed
        self.metrics_path = metrics_path
        self.checkpoint_path = checkpoint_path
        self.rollout_mode = rollout_mode

    # -- construction ---------------------------------------------------

    def _constraint_kind(self):
        if self.algorithm not in ALGORITHM_KINDS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; "
                f"known: {sorted(ALGORITHM_KINDS)}"
            )
        name = ALGORITHM_KINDS[self.algorithm]
        if name == "reachability":
            return Reachability()
        if name == "cumulative-cost":
            return CumulativeCost(threshold=self.cost_threshold)
        if name == "cbf":
            return Cbf(mu=self.mu)
        if name == "safety-index":
            return SafetyIndex(sigma=self.si_sigma, n=self.si_n,
                               k=self.si_k, eta_d=self.si_eta_d)
        return RewardShaping(rho=self.rho)

    def _schedules(self):
        critic = LinearSchedule(*self.critic_lr, self.total_steps)
        actor = LinearSchedule(*self.actor_lr, self.total_steps)
        mult = LinearSchedule(*self.multiplier_lr, self.total_steps)
        validate_timescales(critic, actor, mult, self.total_steps)
        return critic, actor, mult

    def _build_bundle(self, env: ControlEnv, rng: np.random.Generator) -> NetBundle:
        kind = self._constraint_kind()
        sdim, adim, w = env.spec.state_dim, env.spec.action_dim, self.hidden_width
        q_spec = MlpSpec((sdim + adim, w, w, 1))
        actor_spec = MlpSpec((sdim, w, w, adim), output="tanh_box",
                             out_low=tuple(env.spec.action_low),
                             out_high=tuple(env.spec.action_high))
        q = q_spec.init(rng)
        actor = actor_spec.init(rng)
        bundle = NetBundle(
            kind=kind, gamma=self.gamma, dt=env.spec.dt,
            q_spec=q_spec, q=q, q_target=q.copy(),
            actor_spec=actor_spec, actor=actor,
            lambda_max=self.lambda_max,
        )
        if not isinstance(kind, RewardShaping):
            g = q_spec.init(rng)
            bundle.g_spec = q_spec
            bundle.g = g
            bundle.g_target = g.copy()
        if multiplier_shape(kind) == "statewise":
            lw = self.multiplier_width or w
            lam_spec = MlpSpec((sdim, lw, lw, 1), output="softplus")
            bundle.lam_spec = lam_spec
            bundle.lam = lam_spec.init(rng)
            # Start the dual variable small: constraint pressure should
            # grow from evidence, not from the head's resting point.
            bundle.lam[-1] = self.multiplier_init_bias
        return bundle

    # -- training -------------------------------------------------------

    def fit(self, env: ControlEnv) -> "ConstrainedActorCritic":
        crit_sched, act_sched, mult_sched = self._schedules()
        if self.actor_interval < 1 or self.multiplier_interval < 1:
            raise ValueError("update intervals must be >= 1")
        if self.rollout_mode not in ("inline", "queued"):
            raise ValueError(f"unknown rollout_mode {self.rollout_mode!r}")

        seeds = np.random.SeedSequence(self.seed).spawn(5)
        init_rng, reset_rng, noise_rng, buffer_rng = (
            np.random.default_rng(s) for s in seeds[:4]
        )
        # Each metrics event spawns the next child off this sequence, so
        # evaluation draws are reproducible and independent of training.
        self._eval_ss = seeds[4]

        bundle = self._build_bundle(env, init_rng)
        buffer = ReplayBuffer(self.buffer_capacity, env.spec.state_dim,
                              env.spec.action_dim, buffer_rng)
        proj = ProjectionSpec(clip_norm=self.grad_clip)
        adam = {
            "q": AdamState(*self.critic_lr, self.total_steps, bundle.q.size),
            "actor": AdamState(*self.actor_lr, self.total_steps, bundle.actor.size),
        }
        if bundle.g is not None:
            adam["g"] = AdamState(*self.critic_lr, self.total_steps, bundle.g.size)
        if bundle.lam is not None:
            adam["lam"] = AdamState(*self.multiplier_lr, self.total_steps,
                                    bundle.lam.size)

        probes = None
        if isinstance(env, DoubleIntegratorEnv):
            probes = probe_states()

        rollout = _Rollout(env, bundle, reset_rng, noise_rng,
                           LinearSchedule(*self.explore_std, self.total_steps))
        if self.rollout_mode == "queued":
            rollout = _QueuedRollout(rollout)

        losses = {"q": np.nan, "g": np.nan, "actor": np.nan}
        metrics_rows = []
        try:
            for k in range(self.total_steps):
                assert crit_sched(k) > act_sched(k) > mult_sched(k)
                t, h_next, r_stuck = rollout.step(k)
                buffer.push(t, h_next, r_stuck)

                if len(buffer) >= max(self.warmup_steps, self.batch_size):
                    batch = buffer.sample(self.batch_size)
                    (q_grad, losses["q"]), g_part = coupled_critic_updates(batch, bundle)
                    adam_step(bundle.q, q_grad, adam["q"], proj)
                    polyak_update(bundle.q_target, bundle.q, self.tau)
                    if g_part is not None:
                        g_grad, losses["g"] = g_part
                        adam_step(bundle.g, g_grad, adam["g"], proj)
                        polyak_update(bundle.g_target, bundle.g, self.tau)
                    if k % self.actor_interval == 0:
                        grad, losses["actor"] = actor_update(batch, bundle)
                        adam_step(bundle.actor, grad, adam["actor"], proj)
                    if (k % self.multiplier_interval == 0
                            and k >= self.multiplier_warmup):
                        grad, _ = multiplier_update(batch, bundle)
                        if grad is None:
                            pass
                        elif np.isscalar(grad):
                            lr = mult_sched(k)
                            bundle.lam_scalar = float(np.clip(
                                bundle.lam_scalar + lr * grad, 0.0, self.lambda_max
                            ))
                        else:
                            adam_step(bundle.lam, -grad, adam["lam"], proj)

                if (k + 1) % self.eval_interval == 0 or k + 1 == self.total_steps:
                    row = self._metrics_row(env, bundle, k + 1, losses, probes,
                                            len(metrics_rows))
                    metrics_rows.append(row)
        finally:
            if hasattr(rollout, "close"):
                rollout.close()

        self.env_ = env
        self.bundle_ = bundle
        self.metrics_ = metrics_rows
        self.probes_ = probes
        if self.metrics_path is not None:
            self.write_metrics(self.metrics_path)
        if self.checkpoint_path is not None:
            self.save(self.checkpoint_path)
        return self

    def _metrics_row(self, env, bundle, step, losses, probes, event_idx):
        rng = np.random.default_rng(self._eval_ss.spawn(1)[0])
        stats = evaluate_policy(env, bundle, self.eval_episodes, rng)
        lam_feas = lam_inf = np.nan
        if probes is not None and bundle.lam is not None:
            lam_feas = float(np.mean(bundle.lam_value(probes[0])))
            lam_inf = float(np.mean(bundle.lam_value(probes[1])))
        elif probes is not None and multiplier_shape(bundle.kind) == "scalar":
            lam_feas = lam_inf = bundle.lam_scalar
        return {
            "step": step,
            "avg_return": stats["avg_return"],
            "violation_rate": stats["violation_rate"],
            "q_loss": losses["q"],
            "qh_loss": losses["g"],
            "actor_loss": losses["actor"],
            "mean_lambda_feasible": lam_feas,
            "mean_lambda_infeasible": lam_inf,
        }

    def write_metrics(self, path) -> None:
        check_fitted(self, "metrics_")
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(METRICS_HEADER + "\n")
            for row in self.metrics_:
                f.write(
                    f"{row['step']},{row['avg_return']:.10g},"
                    f"{row['violation_rate']:.10g},{row['q_loss']:.10g},"
                    f"{row['qh_loss']:.10g},{row['actor_loss']:.10g},"
                    f"{row['mean_lambda_feasible']:.10g},"
                    f"{row['mean_lambda_infeasible']:.10g}\n"
                )

    # -- inference ------------------------------------------------------

    def predict(self, X) -> np.ndarray:
        check_fitted(self, "bundle_")
        X = check_states(X, self.env_.spec.state_dim)
        return self.bundle_.act(X)

    def constraint_margin(self, X) -> np.ndarray:
        check_fitted(self, "bundle_")
        X = check_states(X, self.env_.spec.state_dim)
        return self.bundle_.constraint_margin(X)

    def learned_feasible_mask(self, grid: GridSpec) -> np.ndarray:
        """Sub-zero set of the constraint functional on a state grid
        (double integrator: the grid is the full state space)."""
        margins = self.constraint_margin(grid.points())
        return (margins <= 0.0).reshape(grid.counts)

    def export_slice(self, slice_spec: SliceSpec) -> ValueGrid:
        """Constraint functional at (s, pi(s)) over a 2-D state plane."""
        check_fitted(self, "bundle_")
        grid = slice_spec.grid()
        pts = grid.points()
        states = self.env_.plane_states(
            slice_spec.axes[0], pts[:, 0], slice_spec.axes[1], pts[:, 1],
            slice_spec.fixed,
        )
        values = self.bundle_.constraint_margin(states)
        return ValueGrid(spec=grid, values=values.reshape(grid.counts))

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        check_fitted(self, "bundle_")
        b = self.bundle_
        nets = {"q": (b.q_spec, b.q), "q_target": (b.q_spec, b.q_target),
                "actor": (b.actor_spec, b.actor)}
        if b.g is not None:
            nets["g"] = (b.g_spec, b.g)
            nets["g_target"] = (b.g_spec, b.g_target)
        if b.lam is not None:
            nets["lam"] = (b.lam_spec, b.lam)
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        params = {k: v for k, v in self.get_params().items()
                  if k not in ("metrics_path", "checkpoint_path")}
        save_checkpoint(path, nets, extra={
            "params": params,
            "lam_scalar": b.lam_scalar,
            "env": self.env_.spec.name,
        })

    @classmethod
    def load(cls, path, env: ControlEnv) -> "ConstrainedActorCritic":
        nets, extra = load_checkpoint(path)
        stored_env = extra.get("env")
        if stored_env is not None and stored_env != env.spec.name:
            raise ValueError(
                f"checkpoint was trained on {stored_env!r}, got {env.spec.name!r}"
            )
        params = {
            k: (tuple(v) if isinstance(v, list) else v)
            for k, v in extra.get("params", {}).items()
        }
        est = cls(**params)
        kind = est._constraint_kind()
        q_spec, q = nets["q"]
        actor_spec, actor = nets["actor"]
        bundle = NetBundle(
            kind=kind, gamma=est.gamma, dt=env.spec.dt,
            q_spec=q_spec, q=q, q_target=nets["q_target"][1],
            actor_spec=actor_spec, actor=actor,
            lambda_max=est.lambda_max,
            lam_scalar=float(extra.get("lam_scalar", 0.0)),
        )
        if "g" in nets:
            bundle.g_spec, bundle.g = nets["g"]
            bundle.g_target = nets["g_target"][1]
        if "lam" in nets:
            bundle.lam_spec, bundle.lam = nets["lam"]
        est.env_ = env
        est.bundle_ = bundle
        est.metrics_ = []
        return est


def evaluate_policy(env: ControlEnv, bundle: NetBundle, episodes: int,
                    rng: np.random.Generator) -> dict:
    """Benchmark evaluation protocol.

    Quadrotor: the four static hover-feasible starts, full-length
    episodes. Double integrator: `episodes` starts drawn uniformly from
    the closed-form kernel. Reports the average return, the per-step
    violation rate, and the fraction of episodes with any violation.
    """
    if env.spec.name == "quadrotor":
        starts = [env.start_state(x, z) for x, z in EVAL_STARTS_XZ]
    else:
        starts = list(feasible_starts(env, episodes, rng))
    returns, rates, violated = [], [], []
    for s0 in starts:
        r, rate, bad = run_episode(env, bundle, s0)
        returns.append(r)
        rates.append(rate)
        violated.append(bad)
    return {
        "avg_return": float(np.mean(returns)),
        "violation_rate": float(np.mean(rates)),
        "episodes_violating": float(np.mean(violated)),
        "n_episodes": len(starts),
    }
