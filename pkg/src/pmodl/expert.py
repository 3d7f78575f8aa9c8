"""Scripted expert: Dijkstra on an inflated grid plus a pure-pursuit tracker.

The expert sees privileged information (map, true pose, target). It yields
behavioural-cloning labels directly and COACH-style relative corrections by
comparison with the agent's action.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import PlanningError
from .world import GridWorld

SQRT2 = math.sqrt(2.0)
# (dx, dy, relative cost), ordered so equal-cost neighbours are scanned by index
NEIGHBOURS = [
    (-1, -1, SQRT2), (0, -1, 1.0), (1, -1, SQRT2),
    (-1, 0, 1.0), (1, 0, 1.0),
    (-1, 1, SQRT2), (0, 1, 1.0), (1, 1, SQRT2),
]


def inflate(world: GridWorld, radius: float) -> np.ndarray:
    """Cells whose centre lies within ``radius`` (plus half a cell diagonal) of an obstacle.

    The map border counts as an obstacle.
    """
    padded = np.pad(world.occupied, 1, constant_values=True)
    dist = ndimage.distance_transform_edt(~padded)[1:-1, 1:-1] * world.resolution
    return world.occupied | (dist < radius + world.resolution * SQRT2 / 2)


def dijkstra_field(free: np.ndarray, source: tuple[int, int], resolution: float = 1.0) -> np.ndarray:
    """Shortest 8-connected path cost from ``source`` to every free cell (inf if unreachable).

    The priority queue is keyed by ``(cost, cell index)`` so settlement order,
    and therefore every derived path, is deterministic.
    """
    h, w = free.shape
    sx, sy = source
    dist = np.full(h * w, math.inf)
    if not free[sy, sx]:
        return dist.reshape(h, w)
    flat_free = free.reshape(-1).tolist()
    d = dist.tolist()
    done = [False] * (h * w)
    s = sy * w + sx
    d[s] = 0.0
    heap = [(0.0, s)]
    steps = [(dx, dy, c * resolution) for dx, dy, c in NEIGHBOURS]
    while heap:
        cost, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        y, x = divmod(i, w)
        for dx, dy, c in steps:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h:
                j = ny * w + nx
                if flat_free[j] and not done[j]:
                    nc = cost + c
                    if nc < d[j]:
                        d[j] = nc
                        heapq.heappush(heap, (nc, j))
    return np.array(d).reshape(h, w)


@dataclass(frozen=True)
class Path:
    points: np.ndarray  # (m, 2) world-frame way points

    @property
    def length(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    def __len__(self):
        return len(self.points)


class GridPlanner:
    """Shortest paths over the free space inflated by the robot size.

    Distance fields are computed towards a goal once and cached, so planning
    again from a new start (every control step) only costs a descent.
    """

    def __init__(self, world: GridWorld, inflation_radius: float, cache_size: int = 4):
        self.world = world
        self.inflation_radius = inflation_radius
        self.free = ~inflate(world, inflation_radius)
        self.raw_free = ~world.occupied
        self.labels, _ = ndimage.label(self.free, structure=np.ones((3, 3), dtype=int))
        iy, ix = np.nonzero(self.free)
        self.free_cells = np.stack([ix, iy], axis=1)
        ox, oy = world.origin
        r = world.resolution
        self.centers = np.stack([ox + (ix + 0.5) * r, oy + (iy + 0.5) * r], axis=1)
        self._cache: dict[tuple[int, int], np.ndarray] = {}
        self._cache_size = cache_size
        self._flat_cache: dict = {}

    def reachable_cells(self, cell: tuple[int, int]) -> np.ndarray:
        """Boolean mask over ``free_cells`` connected to ``cell``."""
        label = self.labels[cell[1], cell[0]]
        if label == 0:
            return np.zeros(len(self.free_cells), dtype=bool)
        return self.labels[self.free_cells[:, 1], self.free_cells[:, 0]] == label

    def field(self, goal_cell: tuple[int, int]) -> np.ndarray:
        f = self._cache.get(goal_cell)
        if f is None:
            f = dijkstra_field(self.free, goal_cell, self.world.resolution)
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[goal_cell] = f
        return f

    def _flat_field(self, goal_cell) -> list[float]:
        key = ("flat", goal_cell)
        flat = self._flat_cache.get(key)
        if flat is None:
            flat = self.field(goal_cell).reshape(-1).tolist()
            self._flat_cache = {key: flat}
        return flat

    def _cell(self, xy) -> tuple[int, int]:
        cell = self.world.cell_of(xy[0], xy[1])
        if cell is None:
            raise PlanningError(f"point {tuple(xy)} is outside the map")
        return cell

    def cell_path(self, start_cell, goal_cell) -> list[tuple[int, int]]:
        """Optimal cell sequence from start to goal (both included)."""
        if not self.free[goal_cell[1], goal_cell[0]]:
            raise PlanningError(f"goal cell {goal_cell} is not in inflated free space")
        f = self.field(goal_cell)
        h, w = f.shape
        flat = self._flat_field(goal_cell)
        cells = []
        sx, sy = start_cell
        if not np.isfinite(f[sy, sx]):
            prefix = self._escape(start_cell, f)
            cells.extend(prefix[:-1])
            sx, sy = prefix[-1]
        cells.append((sx, sy))
        res = self.world.resolution
        while (sx, sy) != tuple(goal_cell):
            best, best_idx, nxt = math.inf, None, None
            for dx, dy, c in NEIGHBOURS:
                nx, ny = sx + dx, sy + dy
                if 0 <= nx < w and 0 <= ny < h:
                    idx = ny * w + nx
                    v = c * res + flat[idx]
                    if v < best or (v == best and v < math.inf and idx < best_idx):
                        best, best_idx, nxt = v, idx, (nx, ny)
            if nxt is None:
                raise PlanningError(f"cell {(sx, sy)} has no route to the goal")
            sx, sy = nxt
            cells.append(nxt)
        return cells

    def _escape(self, start_cell, f) -> list[tuple[int, int]]:
        """Route out of the inflation band to the nearest plannable cell.

        Among equally near exits the one closest to the goal wins.
        """
        free = self.raw_free
        h, w = free.shape
        sx, sy = start_cell
        if not free[sy, sx]:
            raise PlanningError(f"start cell {start_cell} is occupied")
        res = self.world.resolution
        s = sy * w + sx
        g = {s: 0.0}
        parent = {s: None}
        heap = [(0.0, s)]
        exit_cost, best, best_cell = math.inf, math.inf, None
        closed = set()
        while heap:
            cost, i = heapq.heappop(heap)
            if i in closed:
                continue
            closed.add(i)
            if cost > exit_cost:
                break
            y, x = divmod(i, w)
            if np.isfinite(f[y, x]):
                exit_cost = cost
                if f[y, x] < best:
                    best, best_cell = f[y, x], i
                continue
            for dx, dy, c in NEIGHBOURS:
                nx, ny = x + dx, y + dy
                if 0 <= nx < w and 0 <= ny < h and free[ny, nx]:
                    j = ny * w + nx
                    nc = cost + c * res
                    if nc < g.get(j, math.inf):
                        g[j] = nc
                        parent[j] = i
                        heapq.heappush(heap, (nc, j))
        if best_cell is None:
            raise PlanningError(f"no route from {start_cell} to the goal")
        chain = []
        i = best_cell
        while i is not None:
            y, x = divmod(i, w)
            chain.append((x, y))
            i = parent[i]
        return chain[::-1]

    def plan(self, start, goal) -> Path:
        """Path between two world points; end points are kept exact."""
        sc, gc = self._cell(start), self._cell(goal)
        cells = self.cell_path(sc, gc)
        pts = [self.world.cell_center(*c) for c in cells]
        pts[0] = (float(start[0]), float(start[1]))
        if len(pts) == 1:
            pts.append((float(goal[0]), float(goal[1])))
        else:
            pts[-1] = (float(goal[0]), float(goal[1]))
        return Path(np.array(pts, dtype=float))

    def shortest_length(self, start, goal) -> float:
        return self.plan(start, goal).length


def plan_path(world: GridWorld, start, goal, footprint) -> Path:
    """One-shot planning with inflation by the footprint circumradius."""
    return GridPlanner(world, footprint.circumradius).plan(start, goal)


def lookahead_waypoint(path: Path, pose, rho_lookahead: float) -> tuple[float, float, float]:
    """Way point one look-ahead arc length past the closest point, in the robot frame.

    Returns ``(x_wp, y_wp, theta_wp)``.
    """
    pts = np.asarray(path.points, dtype=float)
    if len(pts) == 0:
        raise ValueError("empty path")
    px, py, th = pose[0], pose[1], pose[2]
    if len(pts) == 1:
        wp = pts[0]
    else:
        a, b = pts[:-1], pts[1:]
        seg = b - a
        seg_len = np.linalg.norm(seg, axis=1)
        denom = np.where(seg_len > 0, seg_len**2, 1.0)
        t = np.clip(((px - a[:, 0]) * seg[:, 0] + (py - a[:, 1]) * seg[:, 1]) / denom, 0.0, 1.0)
        proj = a + t[:, None] * seg
        d = np.hypot(proj[:, 0] - px, proj[:, 1] - py)
        # ties go to the later segment
        k = len(d) - 1 - int(np.argmin(d[::-1]))
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        s0 = cum[k] + t[k] * seg_len[k]
        ahead = np.flatnonzero(cum - s0 >= rho_lookahead - 1e-9)
        wp = pts[ahead[0]] if len(ahead) else pts[-1]
    dx, dy = wp[0] - px, wp[1] - py
    c, s = math.cos(th), math.sin(th)
    xr, yr = c * dx + s * dy, -s * dx + c * dy
    return xr, yr, math.atan2(yr, xr)


@dataclass(frozen=True)
class PurePursuitConfig:
    rho_lookahead: float = 0.5
    k_x: float = 2.0
    theta_align: float = math.pi / 6  # below this |theta_wp| the robot may drive forward
    theta_turn: float = math.pi / 2  # beyond this it turns in place at full rate

    def __post_init__(self):
        if not 0 < self.theta_align <= self.theta_turn:
            raise ValueError("need 0 < theta_align <= theta_turn")
        if not self.rho_lookahead > 0:
            raise ValueError("rho_lookahead must be positive")


def pure_pursuit(waypoint, cfg: PurePursuitConfig, bounds) -> np.ndarray:
    """Velocity command towards a robot-frame way point ``(x_wp, y_wp[, theta_wp])``."""
    x_wp, y_wp = float(waypoint[0]), float(waypoint[1])
    th = float(waypoint[2]) if len(waypoint) > 2 else math.atan2(y_wp, x_wp)
    lo, hi = bounds.low, bounds.high
    vx = cfg.k_x * x_wp if abs(th) < cfg.theta_align else 0.0
    vx = min(max(vx, lo[0]), hi[0])
    if abs(th) < cfg.theta_turn:
        w = min(max(2.0 * y_wp / cfg.rho_lookahead**2, lo[1]), hi[1])
    else:
        w = hi[1] if th >= 0 else lo[1]
    return np.array([vx, w])


class Expert:
    """Privileged pure-pursuit policy that replans at every call."""

    def __init__(self, planner: GridPlanner, cfg: PurePursuitConfig, bounds):
        self.planner = planner
        self.cfg = cfg
        self.bounds = bounds

    def path(self, pose, target) -> Path:
        return self.planner.plan((pose[0], pose[1]), target)

    def __call__(self, pose, target) -> np.ndarray:
        wp = lookahead_waypoint(self.path(pose, target), pose, self.cfg.rho_lookahead)
        return pure_pursuit(wp, self.cfg, self.bounds)


def expert_action(world: GridWorld, pose, target, footprint, cfg: PurePursuitConfig, bounds) -> np.ndarray:
    path = plan_path(world, (pose[0], pose[1]), target, footprint)
    wp = lookahead_waypoint(path, pose, cfg.rho_lookahead)
    return pure_pursuit(wp, cfg, bounds)


@dataclass(frozen=True)
class CoachConfig:
    error: float = 0.5
    thresh_x: float = 0.1
    thresh_theta: float = 0.1
    capacity: int = 256

    def __post_init__(self):
        if not (self.error > 0 and self.thresh_x > 0 and self.thresh_theta > 0):
            raise ValueError("error factor and thresholds must be positive")


def coach_feedback(expert, agent, cfg: CoachConfig) -> np.ndarray:
    """Per-dimension correction signs in {-1, 0, 1}."""
    delta = np.asarray(expert, dtype=float) - np.asarray(agent, dtype=float)
    thresh = np.array([cfg.thresh_x, cfg.thresh_theta])
    return np.where(np.abs(delta) > thresh, np.sign(delta), 0.0)


def coach_label(action, h, error: float, bounds) -> np.ndarray:
    a = np.asarray(action, dtype=float) + error * np.asarray(h, dtype=float)
    return np.minimum(np.maximum(a, bounds.low), bounds.high)
