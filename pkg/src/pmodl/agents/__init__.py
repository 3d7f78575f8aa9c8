"""Learning algorithms: DDPG, the PModL modulator, and the DAgger and COACH baselines."""

from .buffers import FeedbackSample, ReplayBuffer, Transition
from .ddpg import (
    ActorCritic,
    ActorStats,
    DDPGConfig,
    actor_pmodl_update,
    critic_update,
    ddpg_actor_update,
    il_labels,
    il_loss,
    mixed_actor_loss,
    rl_loss,
    soft_update_targets,
    supervised_update,
    td_targets,
)
from .imitation import coach_update, dagger_update
from .noise import OUNoise, decay_factor
from .pmodl import PModLState, compute_z, lambda_step, pmodl_loss, record_outcome, update_lambda

__all__ = [
    "ActorCritic",
    "ActorStats",
    "DDPGConfig",
    "FeedbackSample",
    "OUNoise",
    "PModLState",
    "ReplayBuffer",
    "Transition",
    "actor_pmodl_update",
    "coach_update",
    "compute_z",
    "critic_update",
    "dagger_update",
    "ddpg_actor_update",
    "decay_factor",
    "il_labels",
    "il_loss",
    "lambda_step",
    "mixed_actor_loss",
    "pmodl_loss",
    "record_outcome",
    "rl_loss",
    "soft_update_targets",
    "supervised_update",
    "td_targets",
    "update_lambda",
]
