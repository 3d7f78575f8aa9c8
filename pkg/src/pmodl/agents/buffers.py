from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Generic, TypeVar

import numpy as np

from ..env import Observation
from ..errors import UsageError

T = TypeVar("T")


@dataclass(frozen=True)
class Transition:
    obs: Observation
    action: np.ndarray
    reward: float
    next_obs: Observation
    terminal: bool  # success or collision; a timeout is not terminal


@dataclass(frozen=True)
class FeedbackSample:
    """An imitation label: ``(o, a')`` for BC (``h`` is None) or ``(o, a, h)`` for COACH."""

    obs: Observation
    action: np.ndarray
    h: np.ndarray | None = None


class ReplayBuffer(Generic[T]):
    """Ring buffer with oldest-first eviction; ``capacity=None`` never evicts."""

    def __init__(self, capacity: int | None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Any] = []
        self._next = 0
        self.pushed = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: T) -> None:
        if self.capacity is None or len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._next] = item
            self._next = (self._next + 1) % self.capacity
        self.pushed += 1

    def items(self) -> list[T]:
        """Contents from oldest to newest."""
        return self._items[self._next:] + self._items[: self._next]

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        size = len(self._items)
        if size == 0:
            raise UsageError("cannot sample from an empty buffer")
        if n < 1:
            raise ValueError("batch size must be positive")
        if size < n:
            return rng.integers(0, size, size=n)
        return rng.choice(size, size=n, replace=False)

    def sample(self, n: int, rng: np.random.Generator) -> list[T]:
        items = self._items
        return [items[i] for i in self.sample_indices(n, rng)]
