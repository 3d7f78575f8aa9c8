"""Multimodal actor and critic over (point cloud, odometry, target) observations.

Both networks embed the point cloud with a shared per-point MLP followed by a
max over points, embed odometry and target with one dense layer each, and
concatenate the three (plus the action, for the critic) into a dense trunk.
The actor squashes its output with tanh into the action box; the critic head
is linear.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import UsageError
from . import autodiff as ad

CHECKPOINT_VERSION = 1
FINAL_LAYER = "out"


@dataclass(frozen=True)
class Architecture:
    kind: str = "actor"  # "actor" or "critic"
    encoder: tuple[int, ...] = (64, 64)
    odom_embed: int = 32
    target_embed: int = 32
    trunk: tuple[int, ...] = (256, 128)
    slope: float = 0.01
    action_dim: int = 2
    action_low: tuple[float, ...] = (0.0, -1.0)
    action_high: tuple[float, ...] = (1.0, 1.0)
    dtype: str = "float64"

    def __post_init__(self):
        if self.kind not in ("actor", "critic"):
            raise ValueError(f"unknown network kind {self.kind!r}")
        for name in ("encoder", "trunk", "action_low", "action_high"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def layer_shapes(self) -> dict[str, tuple[int, int]]:
        shapes = {}
        width = 2
        for i, n in enumerate(self.encoder):
            shapes[f"enc{i}"] = (width, n)
            width = n
        shapes["odom"] = (2, self.odom_embed)
        shapes["target"] = (2, self.target_embed)
        width = self.encoder[-1] + self.odom_embed + self.target_embed
        if self.kind == "critic":
            width += self.action_dim
        for i, n in enumerate(self.trunk):
            shapes[f"trunk{i}"] = (width, n)
            width = n
        shapes[FINAL_LAYER] = (width, self.action_dim if self.kind == "actor" else 1)
        return shapes

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Architecture":
        return cls(**json.loads(text))


@dataclass
class NetworkParams:
    """Named parameter arrays, ``<layer>.w`` and ``<layer>.b`` per layer."""

    arch: Architecture
    blocks: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def final_layer(self) -> str:
        return FINAL_LAYER

    def layers(self) -> list[str]:
        return list(self.arch.layer_shapes())

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.arch, {k: v.copy() for k, v in self.blocks.items()})

    def validate(self) -> None:
        for layer, (n_in, n_out) in self.arch.layer_shapes().items():
            for key, shape in ((f"{layer}.w", (n_in, n_out)), (f"{layer}.b", (n_out,))):
                if key not in self.blocks:
                    raise UsageError(f"missing parameter block {key}")
                if self.blocks[key].shape != shape:
                    raise UsageError(f"{key} has shape {self.blocks[key].shape}, expected {shape}")
        extra = set(self.blocks) - {f"{l}.{s}" for l in self.arch.layer_shapes() for s in "wb"}
        if extra:
            raise UsageError(f"unexpected parameter blocks {sorted(extra)}")

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.blocks.values()])

    @property
    def size(self) -> int:
        return sum(v.size for v in self.blocks.values())


def init_params(arch: Architecture, rng: np.random.Generator, final_scale: float = 3e-3) -> NetworkParams:
    """Uniform fan-in initialisation; the output layer starts near zero."""
    dtype = np.dtype(arch.dtype)
    blocks = {}
    for layer, (n_in, n_out) in arch.layer_shapes().items():
        bound = final_scale if layer == FINAL_LAYER else 1.0 / np.sqrt(n_in)
        blocks[f"{layer}.w"] = rng.uniform(-bound, bound, size=(n_in, n_out)).astype(dtype)
        blocks[f"{layer}.b"] = rng.uniform(-bound, bound, size=n_out).astype(dtype)
    return NetworkParams(arch, blocks)


@dataclass
class ObsBatch:
    """Padded batch of observations.

    Rows of ``pcl`` beyond a cloud's own points repeat its first point, which
    leaves max pooling unchanged; ``mask`` marks the genuine points. Empty
    clouds are all zeros with an all-False mask.
    """

    pcl: np.ndarray  # (B, K, 2)
    mask: np.ndarray  # (B, K)
    odom: np.ndarray  # (B, 2)
    target: np.ndarray  # (B, 2)

    def __len__(self):
        return len(self.odom)

    @property
    def empty(self) -> np.ndarray:
        return ~self.mask.any(axis=1)

    def permuted(self, rng: np.random.Generator) -> "ObsBatch":
        """Same batch with every point cloud shuffled (re-padded from the new first point)."""
        pcl = self.pcl.copy()
        for i in range(len(self)):
            k = int(self.mask[i].sum())
            if k:
                pcl[i, :k] = pcl[i, rng.permutation(k)]
                pcl[i, k:] = pcl[i, 0]
        return ObsBatch(pcl, self.mask.copy(), self.odom.copy(), self.target.copy())


def collate(observations: Sequence, dtype=np.float64) -> ObsBatch:
    n = len(observations)
    k = max((len(o.pcl) for o in observations), default=0)
    k = max(k, 1)
    pcl = np.zeros((n, k, 2), dtype=dtype)
    mask = np.zeros((n, k), dtype=bool)
    for i, o in enumerate(observations):
        m = len(o.pcl)
        if m:
            pcl[i, :m] = o.pcl
            pcl[i, m:] = o.pcl[0]
            mask[i, :m] = True
    odom = np.array([o.odom for o in observations], dtype=dtype).reshape(n, 2)
    target = np.array([o.target for o in observations], dtype=dtype).reshape(n, 2)
    return ObsBatch(pcl, mask, odom, target)


def make_leaves(params: NetworkParams) -> dict[str, ad.Value]:
    return {k: ad.leaf(v, k) for k, v in params.blocks.items()}


def _dense(x, leaves, layer):
    return ad.linear(x, leaves[f"{layer}.w"], leaves[f"{layer}.b"])


def _features(arch: Architecture, leaves, obs: ObsBatch) -> list[ad.Value]:
    h = ad.Value(obs.pcl)
    for i in range(len(arch.encoder)):
        h = ad.leaky_relu(_dense(h, leaves, f"enc{i}"), arch.slope)
    pooled = ad.max_pool(h, obs.empty)
    odom = ad.leaky_relu(_dense(obs.odom, leaves, "odom"), arch.slope)
    target = ad.leaky_relu(_dense(obs.target, leaves, "target"), arch.slope)
    return [pooled, odom, target]


def point_features(params: NetworkParams, obs: ObsBatch) -> np.ndarray:
    """Pooled point-cloud embedding, shape (B, encoder[-1])."""
    return _features(params.arch, make_leaves(params), obs)[0].data


def _trunk(arch, leaves, x):
    for i in range(len(arch.trunk)):
        x = ad.leaky_relu(_dense(x, leaves, f"trunk{i}"), arch.slope)
    return _dense(x, leaves, FINAL_LAYER)


def actor_graph(params: NetworkParams, obs: ObsBatch, leaves=None) -> tuple[ad.Value, dict]:
    arch = params.arch
    if leaves is None:
        leaves = make_leaves(params)
    x = ad.concat(_features(arch, leaves, obs), axis=-1)
    raw = ad.tanh(_trunk(arch, leaves, x))
    low, high = np.asarray(arch.action_low), np.asarray(arch.action_high)
    return ad.affine_const(raw, (high - low) / 2, (high + low) / 2), leaves


def critic_graph(params: NetworkParams, obs: ObsBatch, action, leaves=None) -> tuple[ad.Value, dict]:
    arch = params.arch
    if leaves is None:
        leaves = make_leaves(params)
    x = ad.concat(_features(arch, leaves, obs) + [ad.as_value(action)], axis=-1)
    q = _trunk(arch, leaves, x)
    return ad.sum_(q, axis=1), leaves


def forward_actor(params: NetworkParams, obs: ObsBatch) -> np.ndarray:
    return actor_graph(params, obs)[0].data


def forward_critic(params: NetworkParams, obs: ObsBatch, action) -> np.ndarray:
    return critic_graph(params, obs, np.asarray(action))[0].data


def last_layer_grad_norm(grads: dict[str, np.ndarray], layer: str = FINAL_LAYER) -> float:
    """L2 norm of the final layer's weight and bias gradients taken together."""
    keys = [f"{layer}.w", f"{layer}.b"]
    missing = [k for k in keys if k not in grads]
    if missing:
        raise UsageError(f"gradient set lacks {missing}")
    return float(np.sqrt(sum(float(np.sum(np.square(grads[k]))) for k in keys)))


def soft_update(source: NetworkParams, target: NetworkParams, tau: float) -> NetworkParams:
    """In-place ``target <- tau * source + (1 - tau) * target``; returns ``target``."""
    if source.arch.layer_shapes() != target.arch.layer_shapes():
        raise UsageError("soft update between different architectures")
    for k, v in source.blocks.items():
        t = target.blocks[k]
        if t.shape != v.shape:
            raise UsageError(f"shape mismatch for {k}")
        t *= 1.0 - tau
        t += tau * v
    return target


def save_checkpoint(path, networks: dict[str, NetworkParams], extra: dict | None = None) -> None:
    """Write networks (and optional flat arrays / JSON metadata) to an ``.npz`` file."""
    payload = {"__version__": np.array(CHECKPOINT_VERSION)}
    meta = {"networks": {}, "extra": {}}
    for name, params in networks.items():
        meta["networks"][name] = params.arch.to_json()
        for k, v in params.blocks.items():
            payload[f"{name}/{k}"] = v
    for k, v in (extra or {}).items():
        if isinstance(v, np.ndarray):
            payload[f"__extra__/{k}"] = v
        else:
            meta["extra"][k] = v
    payload["__meta__"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path) -> tuple[dict[str, NetworkParams], dict]:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["__version__"])
        if version != CHECKPOINT_VERSION:
            raise UsageError(f"unsupported checkpoint version {version}")
        meta = json.loads(str(data["__meta__"]))
        networks = {}
        for name, arch_json in meta["networks"].items():
            arch = Architecture.from_json(arch_json)
            prefix = f"{name}/"
            blocks = {k[len(prefix):]: data[k].copy() for k in data.files if k.startswith(prefix)}
            ordered = {}
            for layer in arch.layer_shapes():
                for s in "wb":
                    key = f"{layer}.{s}"
                    if key in blocks:
                        ordered[key] = blocks.pop(key)
            ordered.update(blocks)
            params = NetworkParams(arch, ordered)
            params.validate()
            networks[name] = params
        extra = dict(meta["extra"])
        for k in data.files:
            if k.startswith("__extra__/"):
                extra[k[len("__extra__/"):]] = data[k].copy()
    return networks, extra
