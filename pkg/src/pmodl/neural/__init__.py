"""Numpy neural networks with a small reverse-mode autodiff engine."""

from . import autodiff
from .networks import (
    Architecture,
    NetworkParams,
    ObsBatch,
    actor_graph,
    collate,
    critic_graph,
    forward_actor,
    forward_critic,
    init_params,
    last_layer_grad_norm,
    load_checkpoint,
    make_leaves,
    point_features,
    save_checkpoint,
    soft_update,
)
from .optim import Adam

__all__ = [
    "Adam",
    "Architecture",
    "NetworkParams",
    "ObsBatch",
    "actor_graph",
    "autodiff",
    "collate",
    "critic_graph",
    "forward_actor",
    "forward_critic",
    "init_params",
    "last_layer_grad_norm",
    "load_checkpoint",
    "make_leaves",
    "point_features",
    "save_checkpoint",
    "soft_update",
]
