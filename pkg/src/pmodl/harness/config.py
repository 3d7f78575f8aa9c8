"""Run configuration: presets, YAML loading and dotted overrides."""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .. import maps
from ..agents import DDPGConfig
from ..env import EpisodeConfig, NavEnv, RewardConfig
from ..errors import UsageError
from ..expert import CoachConfig, PurePursuitConfig
from ..neural import Architecture
from ..world import Footprint, GridWorld, dual_270_mounts, read_map, single_360_mount

ALGORITHMS = ("ddpg", "dagger", "coach", "ddpg_pmodl_bc", "ddpg_pmodl_coach")
RL_ALGORITHMS = ("ddpg", "ddpg_pmodl_bc", "ddpg_pmodl_coach")
PMODL_ALGORITHMS = ("ddpg_pmodl_bc", "ddpg_pmodl_coach")


@dataclass(frozen=True)
class SensorConfig:
    kind: str = "single360"  # or "dual270"
    beams: int = 32
    rho_min: float = 0.1
    rho_max: float = 18.0
    offset: float = 0.4  # dual270 only: mount distance from the robot centre

    def mounts(self):
        if self.kind == "single360":
            return single_360_mount(self.beams, self.rho_min, self.rho_max)
        if self.kind == "dual270":
            return dual_270_mounts(self.beams, self.offset, self.rho_min, self.rho_max)
        raise UsageError(f"unknown sensor kind {self.kind!r}")


@dataclass(frozen=True)
class NetworkConfig:
    encoder: tuple[int, ...] = (64, 64)
    odom_embed: int = 32
    target_embed: int = 32
    trunk: tuple[int, ...] = (256, 128)
    slope: float = 0.01
    dtype: str = "float64"

    def architecture(self, kind: str, episode: EpisodeConfig) -> Architecture:
        return Architecture(
            kind=kind,
            encoder=tuple(self.encoder),
            odom_embed=self.odom_embed,
            target_embed=self.target_embed,
            trunk=tuple(self.trunk),
            slope=self.slope,
            action_low=(0.0, -episode.v_max_theta),
            action_high=(episode.v_max_x, episode.v_max_theta),
            dtype=self.dtype,
        )


@dataclass(frozen=True)
class NoiseConfig:
    mu: float = 0.0
    sigma: float = 0.3
    theta: float = 0.15
    dt: float = 0.2
    decay_start: float = 1.0
    decay_end: float = 0.05
    decay_fraction: float = 0.8


@dataclass(frozen=True)
class PModLConfig:
    k_sr: int = 100
    lam_init: float = 1.0
    lam_lr: float = 0.025
    lam_min: float = 1.0


@dataclass(frozen=True)
class ImitationConfig:
    lr: float = 1e-4
    batch_size: int = 256
    dagger_capacity: int | None = None  # unbounded aggregation


@dataclass(frozen=True)
class FootprintConfig:
    length: float = 1.1
    width: float = 0.8


@dataclass(frozen=True)
class RunConfig:
    preset: str = "desk"
    algorithm: str = "ddpg_pmodl_bc"
    total_steps: int = 100_000
    eval_interval: int = 5_000
    eval_episodes: int = 50
    train_map: str = "desk_train"
    eval_map: str = "desk_eval"
    periodic_eval_map: str | None = None  # None: evaluate on the training map
    seed: int = 0
    lambda_mode: str = "adaptive"  # or "fixed:<value>"
    out_dir: str = "runs/run"
    log_interval: int = 100
    warmup: int | None = None  # None: the RL batch size
    stop_at_sr: float | None = None  # end training at the first eval reaching this SR
    halt_step: int | None = None  # end training at this step (noise schedule still uses total_steps)
    record_trajectories: bool = True
    sensor: SensorConfig = field(default_factory=SensorConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    pmodl: PModLConfig = field(default_factory=PModLConfig)
    imitation: ImitationConfig = field(default_factory=ImitationConfig)
    ddpg: DDPGConfig = field(default_factory=DDPGConfig)
    coach: CoachConfig = field(default_factory=CoachConfig)
    pursuit: PurePursuitConfig = field(default_factory=PurePursuitConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    footprint: FootprintConfig = field(default_factory=FootprintConfig)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.total_steps < 0:
            raise UsageError("total_steps must be >= 0")
        if self.eval_interval < 1 or self.eval_episodes < 1 or self.log_interval < 1:
            raise UsageError("eval_interval, eval_episodes and log_interval must be >= 1")
        fixed = self.fixed_lambda
        if fixed is not None and fixed < self.pmodl.lam_min:
            raise UsageError(f"fixed lambda {fixed} is below lambda_min {self.pmodl.lam_min}")

    @property
    def fixed_lambda(self) -> float | None:
        return parse_lambda_mode(self.lambda_mode)

    @property
    def effective_warmup(self) -> int:
        return self.ddpg.batch_size if self.warmup is None else self.warmup

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


def parse_lambda_mode(mode: str) -> float | None:
    """``"adaptive"`` gives None; ``"fixed:<v>"`` gives ``v``."""
    if mode == "adaptive":
        return None
    if isinstance(mode, str) and mode.startswith("fixed:"):
        try:
            return float(mode.split(":", 1)[1])
        except ValueError:
            pass
    raise UsageError(f"lambda mode must be 'adaptive' or 'fixed:<value>', got {mode!r}")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


# Each preset lists only the values that differ from the dataclass defaults.
PRESETS: dict[str, dict] = {
    "desk": {
        "network": {"dtype": "float32"},
        "ddpg": {"batch_size": 64},
        "imitation": {"batch_size": 64},
    },
    "paper": {
        "total_steps": 500_000,
        "eval_interval": 10_000,
        "eval_episodes": 100,
        "train_map": "train16",
        "eval_map": "eval16",
        "sensor": {"kind": "dual270", "beams": 1081},
        "ddpg": {"batch_size": 256},
        "imitation": {"batch_size": 256},
    },
}


def _coerce(value, current):
    if isinstance(current, bool) or current is None:
        return value
    if isinstance(current, tuple):
        return tuple(value)
    if isinstance(current, int) and isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(current, float) and isinstance(value, int):
        return float(value)
    return value


def apply_overrides(obj, overrides: dict, prefix: str = ""):
    """Return a copy of dataclass ``obj`` with nested ``overrides`` applied; unknown keys are errors."""
    if not overrides:
        return obj
    known = {f.name: f for f in fields(obj)}
    changes = {}
    for key, value in overrides.items():
        if key not in known:
            raise UsageError(f"unknown config key {prefix}{key}")
        current = getattr(obj, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise UsageError(f"config key {prefix}{key} expects a mapping")
            changes[key] = apply_overrides(current, value, f"{prefix}{key}.")
        else:
            changes[key] = _coerce(value, current)
    try:
        return dataclasses.replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"invalid configuration under {prefix or 'root'}: {exc}") from exc


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def dotted_to_nested(pairs: dict[str, Any]) -> dict:
    nested: dict = {}
    for key, value in pairs.items():
        node = nested
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return nested


def make_config(preset: str = "desk", overrides: dict | None = None) -> RunConfig:
    if preset not in PRESETS:
        raise UsageError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    tree = _merge(PRESETS[preset], overrides or {})
    tree["preset"] = preset
    return apply_overrides(RunConfig(), tree)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a YAML config (its ``preset`` key picks the base) and apply ``overrides`` on top."""
    tree: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"config file {p} does not exist")
        loaded = yaml.safe_load(p.read_text()) or {}
        if not isinstance(loaded, dict):
            raise UsageError(f"config file {p} must hold a mapping")
        tree = loaded
    tree = _merge(tree, overrides or {})
    preset = tree.pop("preset", "desk")
    return make_config(preset, tree)


def dump_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))


def resolve_map(name_or_path: str) -> GridWorld:
    if name_or_path in maps.NAMES:
        return maps.load(name_or_path)
    p = Path(name_or_path)
    if not p.exists():
        raise UsageError(f"map {name_or_path!r} is neither a bundled map ({', '.join(maps.NAMES)}) nor a file")
    return read_map(p)


def build_env(cfg: RunConfig, map_name: str | None = None) -> NavEnv:
    world = resolve_map(map_name or cfg.train_map)
    return NavEnv(
        world=world,
        mounts=cfg.sensor.mounts(),
        footprint=Footprint(cfg.footprint.length, cfg.footprint.width),
        episode=cfg.episode,
        reward=cfg.reward,
    )


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named consumer of randomness."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), zlib.crc32(name.encode())])))
