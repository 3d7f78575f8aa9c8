"""Performance modulation: the success-rate estimate z and the balancing factor lambda."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class PModLState:
    capacity: int = 100
    lam: float = 1.0
    lam_min: float = 1.0
    lr: float = 0.025
    slots: np.ndarray = field(default=None)
    cursor: int = 0
    recorded: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        if not self.lam_min > 0:
            raise ValueError("lam_min must be positive")
        if self.slots is None:
            self.slots = np.zeros(self.capacity, dtype=np.int8)
        self.lam = max(self.lam, self.lam_min)

    @property
    def z(self) -> float:
        return compute_z(self)


def compute_z(state: PModLState) -> float:
    """Mean over every slot, including the zeros that have not been overwritten yet."""
    return float(state.slots.sum()) / state.capacity


def record_outcome(state: PModLState, success) -> PModLState:
    state.slots[state.cursor] = 1 if success else 0
    state.cursor = (state.cursor + 1) % state.capacity
    state.recorded += 1
    return state


def lambda_step(lam: float, g_rl: float, g_il: float, lr: float, lam_min: float) -> float:
    """One subgradient step on ``|lam * g_il - g_rl|`` followed by the clamp."""
    s = np.sign(lam * g_il - g_rl)
    return max(lam - lr * float(s) * g_il, lam_min)


def update_lambda(state: PModLState, g_rl: float, g_il: float) -> PModLState:
    if not (math.isfinite(g_rl) and math.isfinite(g_il)):
        log.warning("skipping lambda update on non-finite gradient norms (%r, %r)", g_rl, g_il)
        return state
    state.lam = lambda_step(state.lam, g_rl, g_il, state.lr, state.lam_min)
    return state


def pmodl_loss(z: float, lam: float, j_rl: float, j_il: float) -> float:
    return z * j_rl + lam * (1.0 - z) * j_il
