"""Bundled grid worlds.

``desk_train``/``desk_eval`` are 12x12 m rooms used by the desk-scale preset;
``train16``/``eval16`` are 16x16 m layouts for the full-size preset.
"""

from importlib import resources

from ..world import GridWorld, load_map

NAMES = ("desk_train", "desk_eval", "train16", "eval16")


def map_path(name: str):
    return resources.files(__name__) / f"{name}.map"


def load(name: str) -> GridWorld:
    if name not in NAMES:
        raise KeyError(f"unknown bundled map {name!r}; choose from {NAMES}")
    return load_map(map_path(name).read_text(encoding="utf-8"))
