"""A tour of the expert: plan on a bundled map, then let pure pursuit drive.

    python3 demos/expert_tour.py [map_name] [seed]

Prints the planned path, the first few control actions and the outcome of
one closed-loop episode, then an ASCII sketch of the map with the route.
"""

from __future__ import annotations

import sys

import numpy as np

from pmodl.expert import Expert
from pmodl.harness import build_env, make_config


def sketch(world, planned, driven) -> str:
    grid = np.where(world.occupied, "#", ".").astype("<U1")
    for pts, mark in ((planned, "o"), (driven, "*")):
        for x, y in pts:
            cell = world.cell_of(x, y)
            if cell is not None:
                grid[cell[1], cell[0]] = mark
    # downsample so a 10 cm map fits in a terminal
    step = max(1, grid.shape[1] // 60)
    rows = ["".join(r[::step]) for r in grid[::-step]]
    return "\n".join(rows)


def main(map_name: str = "desk_train", seed: int = 0) -> None:
    cfg = make_config("desk")
    env = build_env(cfg, map_name)
    expert = Expert(env.planner, cfg.pursuit, env.bounds)

    state, obs = env.reset(np.random.default_rng(seed))
    path = expert.path(state.pose, state.target)
    print(f"start {tuple(round(float(v), 2) for v in state.pose)}, target {tuple(round(float(v), 2) for v in state.target)}")
    print(f"planned {len(path)} way points, {path.length:.2f} m; the point cloud holds {len(obs.pcl)} points")

    driven = [(state.pose.x, state.pose.y)]
    while not state.done:
        action = expert(state.pose, state.target)
        if state.t < 5:
            print(f"  t={state.t:3d}  v={action[0]:.2f} m/s  w={action[1]:+.2f} rad/s")
        obs, reward, state = env.step(state, action)
        driven.append((state.pose.x, state.pose.y))
    print(f"episode ended in {state.status} after {state.t} steps, {state.travelled:.2f} m driven")
    print(sketch(env.world, path.points, driven))


if __name__ == "__main__":
    args = sys.argv[1:]
    main(args[0] if args else "desk_train", int(args[1]) if len(args) > 1 else 0)
