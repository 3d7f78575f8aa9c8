from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from .networks import NetworkParams


@dataclass
class Adam:
    """Adam with optional decoupled weight decay (AdamW when ``weight_decay > 0``).

    Gradients are checked before any state changes, so a rejected step leaves
    parameters and moments untouched.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: NetworkParams, grads: dict[str, np.ndarray]) -> None:
        for k, g in grads.items():
            if k not in params.blocks:
                raise KeyError(f"gradient for unknown block {k}")
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in {k}")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            p = params.blocks[k]
            m = self.m.get(k)
            if m is None:
                m = self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            if self.weight_decay:
                p *= 1.0 - self.lr * self.weight_decay
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype, copy=False)

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}.t": np.array(self.t)}
        for k in self.m:
            out[f"{prefix}.m.{k}"] = self.m[k]
            out[f"{prefix}.v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, prefix: str, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays[f"{prefix}.t"])
        self.m, self.v = {}, {}
        for key, value in arrays.items():
            if key.startswith(f"{prefix}.m."):
                self.m[key[len(prefix) + 3:]] = value.copy()
            elif key.startswith(f"{prefix}.v."):
                self.v[key[len(prefix) + 3:]] = value.copy()
