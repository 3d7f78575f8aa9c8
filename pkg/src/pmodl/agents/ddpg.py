"""DDPG updates and the PModL actor update built on top of them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import TrainingError, UsageError
from ..neural import (
    Adam,
    Architecture,
    NetworkParams,
    ObsBatch,
    collate,
    init_params,
    last_layer_grad_norm,
    make_leaves,
    soft_update,
)
from ..neural import autodiff as ad
from ..neural.networks import actor_graph, critic_graph, forward_actor, forward_critic
from .buffers import FeedbackSample, Transition
from .pmodl import PModLState, update_lambda


@dataclass(frozen=True)
class DDPGConfig:
    gamma: float = 0.99
    tau: float = 0.001
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    critic_weight_decay: float = 0.01
    batch_size: int = 256
    buffer_capacity: int = 400_000

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ActorCritic:
    """Online and target networks plus their optimizers."""

    actor: NetworkParams
    critic: NetworkParams
    target_actor: NetworkParams
    target_critic: NetworkParams
    actor_opt: Adam
    critic_opt: Adam

    @classmethod
    def create(
        cls,
        actor_arch: Architecture,
        critic_arch: Architecture,
        cfg: DDPGConfig,
        rng: np.random.Generator,
        actor_lr: float | None = None,
    ) -> "ActorCritic":
        actor = init_params(actor_arch, rng)
        critic = init_params(critic_arch, rng)
        return cls(
            actor=actor,
            critic=critic,
            target_actor=actor.copy(),
            target_critic=critic.copy(),
            actor_opt=Adam(lr=cfg.actor_lr if actor_lr is None else actor_lr),
            critic_opt=Adam(lr=cfg.critic_lr, weight_decay=cfg.critic_weight_decay),
        )

    def act(self, obs) -> np.ndarray:
        return forward_actor(self.actor, collate([obs], np.dtype(self.actor.arch.dtype)))[0]


@dataclass
class ActorStats:
    j_rl: float = math.nan
    j_il: float = math.nan
    g_rl: float = math.nan
    g_il: float = math.nan
    lam: float = math.nan
    z: float = math.nan
    loss: float = math.nan


def _dtype(params: NetworkParams):
    return np.dtype(params.arch.dtype)


def td_targets(rewards, terminals, q_next, gamma: float) -> np.ndarray:
    """``y = r`` on terminal transitions, ``r + gamma * Q'`` otherwise."""
    rewards = np.asarray(rewards, dtype=float)
    return np.where(np.asarray(terminals, dtype=bool), rewards, rewards + gamma * np.asarray(q_next, dtype=float))


def _check_finite(value: float, what: str, **diag):
    if not math.isfinite(value):
        detail = ", ".join(f"{k}={v}" for k, v in diag.items())
        raise TrainingError(f"non-finite {what}" + (f" ({detail})" if detail else ""))


def critic_update(nets: ActorCritic, batch: Sequence[Transition], gamma: float) -> float:
    """One regression step of Q towards the target-network TD targets; returns the pre-step loss."""
    if not batch:
        raise UsageError("critic update needs a nonempty batch")
    dtype = _dtype(nets.critic)
    obs = collate([t.obs for t in batch], dtype)
    nxt = collate([t.next_obs for t in batch], dtype)
    actions = np.array([t.action for t in batch], dtype=dtype)
    q_next = forward_critic(nets.target_critic, nxt, forward_actor(nets.target_actor, nxt))
    y = td_targets([t.reward for t in batch], [t.terminal for t in batch], q_next, gamma).astype(dtype)
    q, leaves = critic_graph(nets.critic, obs, actions)
    loss = ad.mean(ad.square(q - y))
    value = float(loss.data)
    _check_finite(value, "critic loss", q_max=float(np.max(np.abs(q.data))), y_max=float(np.max(np.abs(y))))
    grads = ad.backward(loss, wrt=list(leaves.values()))
    nets.critic_opt.step(nets.critic, grads)
    return value


def il_labels(samples: Sequence[FeedbackSample], error: float | None, bounds) -> np.ndarray:
    """Regression targets: the stored action for BC, ``clip(a + e h)`` for COACH."""
    a = np.array([s.action for s in samples], dtype=float)
    if error is None:
        return a
    h = np.array([s.h for s in samples], dtype=float)
    return np.minimum(np.maximum(a + error * h, bounds.low), bounds.high)


def rl_loss(actor: NetworkParams, critic: NetworkParams, obs: ObsBatch, leaves=None):
    """``J_RL = -mean Q(o, pi(o))``; only the actor is differentiated downstream."""
    action, leaves = actor_graph(actor, obs, leaves)
    q, _ = critic_graph(critic, obs, action)
    return ad.mul(ad.mean(q), -1.0), leaves


def il_loss(actor: NetworkParams, obs: ObsBatch, labels: np.ndarray, leaves=None):
    """``J_IL = mean_i ||pi(o_i) - label_i||^2``."""
    action, leaves = actor_graph(actor, obs, leaves)
    diff = action - labels.astype(action.data.dtype)
    return ad.mean(ad.sum_(ad.square(diff), axis=1)), leaves


def _final(leaves):
    return [leaves["out.w"], leaves["out.b"]]


def mixed_actor_loss(actor, critic, rl_obs, il_obs, labels, z, lam, leaves=None):
    """Build ``J_RL``, ``J_IL`` and ``z J_RL + lam (1 - z) J_IL`` on shared parameter leaves."""
    if leaves is None:
        leaves = make_leaves(actor)
    j_rl, _ = rl_loss(actor, critic, rl_obs, leaves)
    j_il, _ = il_loss(actor, il_obs, labels, leaves)
    mixed = ad.add(ad.mul(j_rl, float(z)), ad.mul(j_il, float(lam) * (1.0 - float(z))))
    return j_rl, j_il, mixed, leaves


def actor_pmodl_update(
    nets: ActorCritic,
    rl_batch: Sequence[Transition],
    il_batch: Sequence[FeedbackSample],
    pmodl: PModLState,
    z: float,
    bounds,
    coach_error: float | None = None,
    adaptive: bool = True,
) -> ActorStats:
    """Lambda update (when adaptive) followed by one optimizer step on the mixed loss.

    ``coach_error`` selects the COACH labels ``clip(a + e h)``; leave it None for BC.
    """
    if not rl_batch or not il_batch:
        raise UsageError("PModL update needs nonempty RL and IL batches")
    dtype = _dtype(nets.actor)
    rl_obs = collate([t.obs for t in rl_batch], dtype)
    il_obs = collate([s.obs for s in il_batch], dtype)
    labels = il_labels(il_batch, coach_error, bounds)
    j_rl, j_il, _, leaves = mixed_actor_loss(nets.actor, nets.critic, rl_obs, il_obs, labels, z, pmodl.lam)
    g_rl = last_layer_grad_norm(ad.backward(j_rl, wrt=_final(leaves)))
    g_il = last_layer_grad_norm(ad.backward(j_il, wrt=_final(leaves)))
    if adaptive:
        update_lambda(pmodl, g_rl, g_il)
    lam = pmodl.lam
    mixed = ad.add(ad.mul(j_rl, float(z)), ad.mul(j_il, lam * (1.0 - float(z))))
    value = float(mixed.data)
    _check_finite(value, "PModL loss", j_rl=float(j_rl.data), j_il=float(j_il.data), lam=lam, z=z)
    grads = ad.backward(mixed, wrt=list(leaves.values()))
    nets.actor_opt.step(nets.actor, grads)
    return ActorStats(float(j_rl.data), float(j_il.data), g_rl, g_il, lam, z, value)


def ddpg_actor_update(nets: ActorCritic, rl_batch: Sequence[Transition]) -> ActorStats:
    if not rl_batch:
        raise UsageError("actor update needs a nonempty batch")
    obs = collate([t.obs for t in rl_batch], _dtype(nets.actor))
    j_rl, leaves = rl_loss(nets.actor, nets.critic, obs)
    value = float(j_rl.data)
    _check_finite(value, "actor loss")
    grads = ad.backward(j_rl, wrt=list(leaves.values()))
    g_rl = last_layer_grad_norm(grads)
    nets.actor_opt.step(nets.actor, grads)
    return ActorStats(j_rl=value, g_rl=g_rl, loss=value)


def supervised_update(
    actor: NetworkParams, opt: Adam, samples: Sequence[FeedbackSample], bounds, coach_error: float | None = None
) -> ActorStats:
    """One regression step of the policy on imitation labels."""
    if not samples:
        raise UsageError("imitation update needs a nonempty dataset")
    obs = collate([s.obs for s in samples], _dtype(actor))
    labels = il_labels(samples, coach_error, bounds)
    j_il, leaves = il_loss(actor, obs, labels)
    value = float(j_il.data)
    _check_finite(value, "imitation loss")
    grads = ad.backward(j_il, wrt=list(leaves.values()))
    g_il = last_layer_grad_norm(grads)
    opt.step(actor, grads)
    return ActorStats(j_il=value, g_il=g_il, loss=value)


def soft_update_targets(nets: ActorCritic, tau: float) -> None:
    soft_update(nets.actor, nets.target_actor, tau)
    soft_update(nets.critic, nets.target_critic, tau)
