"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from pmodl.env import Observation
from pmodl.neural import Architecture

# One summary line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE: dict[int, str] = {}


def tiny_arch(kind="actor", dtype="float64"):
    return Architecture(kind=kind, encoder=(8, 8), odom_embed=4, target_embed=4, trunk=(16, 8), dtype=dtype)


def random_obs(rng, k_max=6, k_min=0):
    k = int(rng.integers(k_min, k_max + 1))
    r = np.sqrt(rng.uniform(0, 1, k))
    a = rng.uniform(-math.pi, math.pi, k)
    pcl = np.stack([r * np.cos(a), r * np.sin(a)], axis=1).reshape(k, 2)
    odom = np.array([rng.uniform(0, 1), rng.uniform(-1, 1)])
    target = np.array([rng.uniform(0, 1), rng.uniform(-1, 1)])
    return Observation(pcl, odom, target)


def open_room(size=8.0, resolution=0.1, boxes=()):
    from pmodl.world import WorldBuilder

    return WorldBuilder(size, size, resolution, boxes=list(boxes)).build()


TINY_NETWORK = {"encoder": [8, 8], "odom_embed": 4, "target_embed": 4, "trunk": [16, 8]}


def tiny_config(**overrides):
    """A desk-preset run shrunk to seconds: small networks, small batches, short evals."""
    from pmodl.harness.config import _merge, make_config

    base = {
        "total_steps": 120,
        "eval_interval": 60,
        "eval_episodes": 2,
        "log_interval": 20,
        "network": dict(TINY_NETWORK),
        "ddpg": {"batch_size": 8},
        "imitation": {"batch_size": 8},
    }
    return make_config("desk", _merge(base, overrides))
