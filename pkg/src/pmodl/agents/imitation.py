"""Pure imitation baselines: DAgger (aggregated expert labels) and COACH (relative corrections)."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from ..neural import Adam, NetworkParams
from .buffers import ReplayBuffer
from .ddpg import ActorStats, supervised_update


def dagger_update(
    actor: NetworkParams,
    opt: Adam,
    dataset: ReplayBuffer,
    batch_size: int,
    rng: np.random.Generator,
    bounds,
) -> ActorStats:
    if len(dataset) == 0:
        raise UsageError("DAgger dataset is empty")
    return supervised_update(actor, opt, dataset.sample(batch_size, rng), bounds)


def coach_update(
    actor: NetworkParams,
    opt: Adam,
    ring: ReplayBuffer,
    batch_size: int,
    rng: np.random.Generator,
    bounds,
    error: float = 0.5,
) -> ActorStats:
    if len(ring) == 0:
        raise UsageError("COACH ring buffer is empty")
    return supervised_update(actor, opt, ring.sample(batch_size, rng), bounds, coach_error=error)
