"""The four coupled gradient estimators of the constrained actor-critic.

All four return (gradient, scalar loss) where the gradient differentiates
the stated batch-mean objective exactly; targets are computed with the
slow Polyak copies and never contribute gradient. Downstream code owns
applying the gradients (descent for critics and actor, ascent for the
multiplier).

Objectives, per sampled batch B with actions a' = pi(s'):

  critic           mean 1/2 (Q(s,a) - y)^2 with
                   y = r + gamma * ((1-done) Q_tgt(s',a') +
                                    done * r_stuck / (1-gamma)):
                   a terminal successor is priced as being stuck there
                   forever under the neutral action, so ending an
                   episode early never looks cheaper than living with
                   the (all-negative) running cost
  safety critic    mean 1/2 (G(s,a) - y)^2 with y per constraint kind:
                     reachability    max{h, discount(boot)} where boot is
                                      h(s') at terminals else G_tgt(s', a'),
                                      and discount(b) = gamma*b for b > 0
                                      else b: only the violation signal is
                                      discounted, so the feasible side
                                      keeps the undiscounted worst-future
                                      constraint value (anchored, fit-able)
                                      while the infeasible side keeps its
                                      sign at any lookahead depth
                     cumulative cost c + gamma (1-done) G_tgt(s', a')
                     barrier / SI    the pure transition functional
  actor            mean[-Q(s, pi(s)) + lambda(s) * G(s, pi(s))]
  multiplier       mean[G(s, pi(s)) * lambda(s)]  (ascent direction)

The multiplier network's softplus head is clamped at lambda_max; the
clamp gates its gradient so saturated states stop ascending.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    Cbf,
    ConstraintKind,
    CumulativeCost,
    Reachability,
    RewardShaping,
    SafetyIndex,
    direct_target,
    multiplier_shape,
    shape_reward,
)
from .nets import MlpSpec, backward, forward
from .replay import Batch


@dataclass
class NetBundle:
    """Parameter vectors and architecture for one training run."""

    kind: ConstraintKind
    gamma: float
    dt: float
    q_spec: MlpSpec
    q: np.ndarray
    q_target: np.ndarray
    actor_spec: MlpSpec
    actor: np.ndarray
    g_spec: MlpSpec | None = None
    g: np.ndarray | None = None
    g_target: np.ndarray | None = None
    lam_spec: MlpSpec | None = None
    lam: np.ndarray | None = None
    lam_scalar: float = 0.0
    lambda_max: float = 100.0

    @property
    def has_constraint_critic(self) -> bool:
        return self.g is not None

    def act(self, S: np.ndarray) -> np.ndarray:
        return forward(self.actor_spec, self.actor, np.atleast_2d(S))

    def q_value(self, S: np.ndarray, A: np.ndarray) -> np.ndarray:
        X = np.concatenate([np.atleast_2d(S), np.atleast_2d(A)], axis=1)
        return forward(self.q_spec, self.q, X)[:, 0]

    def g_value(self, S: np.ndarray, A: np.ndarray) -> np.ndarray:
        X = np.concatenate([np.atleast_2d(S), np.atleast_2d(A)], axis=1)
        return forward(self.g_spec, self.g, X)[:, 0]

    def lam_value(self, S: np.ndarray) -> np.ndarray:
        """Statewise multiplier, clamped into [0, lambda_max]."""
        raw = forward(self.lam_spec, self.lam, np.atleast_2d(S))[:, 0]
        return np.minimum(raw, self.lambda_max)

    def multipliers(self, S: np.ndarray) -> np.ndarray:
        shape = multiplier_shape(self.kind)
        if shape == "statewise":
            return self.lam_value(S)
        if shape == "scalar":
            return np.full(np.atleast_2d(S).shape[0], self.lam_scalar)
        return np.zeros(np.atleast_2d(S).shape[0])

    def constraint_margin(self, S: np.ndarray) -> np.ndarray:
        """Active constraint functional at (s, pi(s)); <= 0 is satisfied."""
        if not self.has_constraint_critic:
            raise ValueError("this constraint kind has no learned functional")
        g = self.g_value(S, self.act(S))
        if isinstance(self.kind, CumulativeCost):
            return g - self.kind.threshold
        return g


def _effective_reward(bundle: NetBundle, batch: Batch) -> np.ndarray:
    if isinstance(bundle.kind, RewardShaping):
        return shape_reward(bundle.kind, batch.r, batch.h)
    return batch.r


def _terminal_continuation(bundle: NetBundle, batch: Batch) -> np.ndarray:
    """Discounted value of idling at the terminal successor forever."""
    return batch.r_stuck / (1.0 - bundle.gamma)


def critic_update(batch: Batch, bundle: NetBundle):
    """Gradient of the TD loss in the reward critic's parameters."""
    n = len(batch)
    a_next = bundle.act(batch.s_next)
    x_next = np.concatenate([batch.s_next, a_next], axis=1)
    q_next = forward(bundle.q_spec, bundle.q_target, x_next)[:, 0]
    boot = (1.0 - batch.done) * q_next + batch.done * _terminal_continuation(bundle, batch)
    y = _effective_reward(bundle, batch) + bundle.gamma * boot
    x = np.concatenate([batch.s, batch.a], axis=1)
    q, cache = forward(bundle.q_spec, bundle.q, x, want_cache=True)
    err = q[:, 0] - y
    loss = 0.5 * float(np.mean(err**2))
    grad, _ = backward(bundle.q_spec, bundle.q, cache, (err / n)[:, None])
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite critic loss")
    return grad, loss


def coupled_critic_updates(batch: Batch, bundle: NetBundle):
    """Both critic gradients off one batch, sharing the successor action
    and feature matrices; numerically identical to calling critic_update
    and safety_critic_update separately, at two fewer forward passes.

    Returns ((q_grad, q_loss), (g_grad, g_loss) or None).
    """
    n = len(batch)
    kind = bundle.kind
    a_next = bundle.act(batch.s_next)
    x_next = np.concatenate([batch.s_next, a_next], axis=1)
    x = np.concatenate([batch.s, batch.a], axis=1)

    q_next = forward(bundle.q_spec, bundle.q_target, x_next)[:, 0]
    boot_q = (1.0 - batch.done) * q_next + batch.done * _terminal_continuation(bundle, batch)
    y_q = _effective_reward(bundle, batch) + bundle.gamma * boot_q
    q, q_cache = forward(bundle.q_spec, bundle.q, x, want_cache=True)
    err_q = q[:, 0] - y_q
    q_loss = 0.5 * float(np.mean(err_q**2))
    q_grad, _ = backward(bundle.q_spec, bundle.q, q_cache, (err_q / n)[:, None])
    if not np.isfinite(q_loss):
        raise FloatingPointError("non-finite critic loss")
    if not bundle.has_constraint_critic:
        return (q_grad, q_loss), None

    if isinstance(kind, Reachability):
        boot = forward(bundle.g_spec, bundle.g_target, x_next)[:, 0]
        boot = np.where(batch.done > 0, batch.h_next, boot)
        y_g = np.maximum(batch.h, np.where(boot > 0, bundle.gamma * boot, boot))
    elif isinstance(kind, CumulativeCost):
        boot = forward(bundle.g_spec, bundle.g_target, x_next)[:, 0]
        y_g = batch.c + bundle.gamma * (1.0 - batch.done) * boot
    else:
        y_g = direct_target(kind, batch.h, batch.h_next, bundle.dt)
    g, g_cache = forward(bundle.g_spec, bundle.g, x, want_cache=True)
    err_g = g[:, 0] - y_g
    g_loss = 0.5 * float(np.mean(err_g**2))
    g_grad, _ = backward(bundle.g_spec, bundle.g, g_cache, (err_g / n)[:, None])
    if not np.isfinite(g_loss):
        raise FloatingPointError("non-finite safety critic loss")
    return (q_grad, q_loss), (g_grad, g_loss)


def safety_critic_target(batch: Batch, bundle: NetBundle) -> np.ndarray:
    """Regression target for the constraint critic, per kind."""
    kind = bundle.kind
    if isinstance(kind, Reachability):
        a_next = bundle.act(batch.s_next)
        x_next = np.concatenate([batch.s_next, a_next], axis=1)
        boot = forward(bundle.g_spec, bundle.g_target, x_next)[:, 0]
        boot = np.where(batch.done > 0, batch.h_next, boot)
        return np.maximum(batch.h, np.where(boot > 0, bundle.gamma * boot, boot))
    if isinstance(kind, CumulativeCost):
        a_next = bundle.act(batch.s_next)
        x_next = np.concatenate([batch.s_next, a_next], axis=1)
        boot = forward(bundle.g_spec, bundle.g_target, x_next)[:, 0]
        return batch.c + bundle.gamma * (1.0 - batch.done) * boot
    return direct_target(kind, batch.h, batch.h_next, bundle.dt)


def safety_critic_update(batch: Batch, bundle: NetBundle):
    """Gradient of the constraint critic's MSE loss in its parameters."""
    if not bundle.has_constraint_critic:
        raise ValueError("constraint kind has no critic to update")
    n = len(batch)
    y = safety_critic_target(batch, bundle)
    x = np.concatenate([batch.s, batch.a], axis=1)
    g, cache = forward(bundle.g_spec, bundle.g, x, want_cache=True)
    err = g[:, 0] - y
    loss = 0.5 * float(np.mean(err**2))
    grad, _ = backward(bundle.g_spec, bundle.g, cache, (err / n)[:, None])
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite safety critic loss")
    return grad, loss


def actor_update(batch: Batch, bundle: NetBundle):
    """Deterministic policy gradient of the weighted objective.

    The chain runs through the action input of both critics; the
    multiplier is a frozen weight here.
    """
    n = len(batch)
    a, a_cache = forward(bundle.actor_spec, bundle.actor, batch.s, want_cache=True)
    x = np.concatenate([batch.s, a], axis=1)
    sdim = batch.s.shape[1]
    mean_weight = np.full((n, 1), 1.0 / n)

    qv, q_cache = forward(bundle.q_spec, bundle.q, x, want_cache=True)
    _, dq_dx = backward(bundle.q_spec, bundle.q, q_cache, mean_weight)
    da = -dq_dx[:, sdim:]
    loss_terms = -qv[:, 0]

    if bundle.has_constraint_critic:
        lam = bundle.multipliers(batch.s)
        gv, g_cache = forward(bundle.g_spec, bundle.g, x, want_cache=True)
        _, dg_dx = backward(bundle.g_spec, bundle.g, g_cache, mean_weight)
        da = da + lam[:, None] * dg_dx[:, sdim:]
        margin = gv[:, 0]
        if isinstance(bundle.kind, CumulativeCost):
            margin = margin - bundle.kind.threshold
        loss_terms = loss_terms + lam * margin

    # The 1/n scale is already inside mean_weight; da is d(mean objective)/da.
    grad, _ = backward(bundle.actor_spec, bundle.actor, a_cache, da)
    loss = float(np.mean(loss_terms))
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite actor gradient")
    return grad, loss


def multiplier_update(batch: Batch, bundle: NetBundle):
    """Ascent gradient for the dual variable.

    Statewise kinds return a gradient in the multiplier network's
    parameters; the scalar kind returns the scalar mean constraint
    margin. Reward shaping has no multiplier (returns None, 0.0).
    """
    shape = multiplier_shape(bundle.kind)
    if shape == "none":
        return None, 0.0
    a = bundle.act(batch.s)
    g = bundle.g_value(batch.s, a)
    if shape == "scalar":
        margin = g - bundle.kind.threshold
        return float(np.mean(margin)), float(np.mean(margin * bundle.lam_scalar))
    n = len(batch)
    raw, cache = forward(bundle.lam_spec, bundle.lam, batch.s, want_cache=True)
    active = (raw[:, 0] < bundle.lambda_max).astype(np.float64)
    upstream = (g * active / n)[:, None]
    grad, _ = backward(bundle.lam_spec, bundle.lam, cache, upstream)
    lam = np.minimum(raw[:, 0], bundle.lambda_max)
    loss = float(np.mean(g * lam))
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite multiplier gradient")
    return grad, loss
