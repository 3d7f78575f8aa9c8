"""Performance-modulated learning (PModL): RL and imitation signals balanced by gradient norms.

Subpackages and modules:

- ``world``: occupancy grids, sensor mounts, raycasting and footprint collisions
- ``env``: the kinematic navigation task (observations, reward, episodes)
- ``expert``: Dijkstra planning, pure pursuit and COACH feedback
- ``neural``: reverse-mode autodiff, actor/critic networks, Adam
- ``agents``: replay buffers, OU noise, DDPG, PModL, DAgger and COACH updates
- ``harness``: configuration, training loop, evaluation, export and CLI
"""

__version__ = "0.1.0"
