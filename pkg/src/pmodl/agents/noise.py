from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def decay_factor(step: int, total_steps: int, start: float = 1.0, end: float = 0.05, fraction: float = 0.8) -> float:
    """Linear interpolation from ``start`` to ``end`` over the first ``fraction`` of the budget."""
    horizon = fraction * total_steps
    if horizon <= 0 or step >= horizon:
        return end
    return start + (end - start) * (step / horizon)


@dataclass
class OUNoise:
    """Ornstein-Uhlenbeck process, scaled by a linearly decaying factor."""

    dim: int = 2
    mu: float = 0.0
    sigma: float = 0.3
    theta: float = 0.15
    dt: float = 0.2
    decay_start: float = 1.0
    decay_end: float = 0.05
    decay_fraction: float = 0.8
    state: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.state is None:
            self.reset()

    def reset(self) -> None:
        self.state = np.full(self.dim, float(self.mu))

    def advance(self, rng: np.random.Generator) -> np.ndarray:
        xi = rng.standard_normal(self.dim)
        self.state = self.state + self.theta * (self.mu - self.state) * self.dt + self.sigma * math.sqrt(self.dt) * xi
        return self.state

    def decay(self, step: int, total_steps: int) -> float:
        return decay_factor(step, total_steps, self.decay_start, self.decay_end, self.decay_fraction)

    def sample(self, rng: np.random.Generator, step: int, total_steps: int) -> np.ndarray:
        return self.decay(step, total_steps) * self.advance(rng)
