"""Local-planning episodes on a grid world: kinematics, observations and reward."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EpisodeSamplingError, UsageError
from .world import (
    Footprint,
    GridWorld,
    ScanResult,
    SensorMount,
    footprint_collides,
    scan,
    voxel_downsample,
    wrap_angle,
)

RUNNING = "running"
SUCCESS = "success"
COLLISION = "collision"
TIMEOUT = "timeout"
TERMINAL_STATUSES = (SUCCESS, COLLISION)


class Pose(NamedTuple):
    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class ActionBounds:
    v_max_x: float = 1.0
    v_max_theta: float = 1.0
    v_min_x: float = 0.0

    @property
    def low(self) -> np.ndarray:
        return np.array([self.v_min_x, -self.v_max_theta])

    @property
    def high(self) -> np.ndarray:
        return np.array([self.v_max_x, self.v_max_theta])

    def clip(self, action) -> np.ndarray:
        return np.minimum(np.maximum(np.asarray(action, dtype=float), self.low), self.high)

    def corners(self) -> list[tuple[float, float]]:
        lo, hi = self.low, self.high
        return [(vx, w) for vx in (lo[0], hi[0]) for w in (lo[1], hi[1])]


@dataclass
class Observation:
    pcl: np.ndarray  # (k, 2), normalised points in the closed unit disk
    odom: np.ndarray  # (2,)
    target: np.ndarray  # (2,)

    @property
    def k(self) -> int:
        return len(self.pcl)


@dataclass(frozen=True)
class RewardConfig:
    r_success: float = 100.0
    r_collision: float = -100.0
    k_speed: float = 1.0
    k_target: float = 5.0
    k_target_penalty: float = 6.0
    k_fov: float = 3.0
    k_fov_penalty: float = 5.0
    k_danger: float = -10.0
    theta_fov: float = 2 * math.pi / 3
    rho_danger_thresh: float = 0.7
    use_fov: bool = True
    use_danger: bool = True

    def __post_init__(self):
        if not self.r_success > 0 > self.r_collision:
            raise ValueError("need r_success > 0 > r_collision")
        if not self.rho_danger_thresh > 0:
            raise ValueError("rho_danger_thresh must be positive")


@dataclass(frozen=True)
class EpisodeConfig:
    rho_thresh: float = 0.2
    rho_init_thresh: float = 3.0
    rho_max_target: float = 18.0
    rho_max: float = 18.0
    voxel: float = 0.7
    max_steps: int = 400
    dt: float = 0.2
    v_max_x: float = 1.0
    v_max_theta: float = 1.0
    # actuation knobs, off by default (ideal differential robot)
    velocity_lag: float = 0.0
    odom_noise: float = 0.0
    max_reset_attempts: int = 2000

    def __post_init__(self):
        if not self.rho_init_thresh > self.rho_thresh > 0:
            raise ValueError("need rho_init_thresh > rho_thresh > 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class EpisodeState:
    pose: Pose
    target: tuple[float, float]
    t: int = 0
    rho_prev: float = math.nan
    twist: tuple[float, float] = (0.0, 0.0)
    odom: tuple[float, float] = (0.0, 0.0)
    status: str = RUNNING
    start: Pose | None = None
    travelled: float = 0.0
    # (speed, target, fov, danger) parts of the last dense reward; zeros on terminal steps
    terms: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    @property
    def rho_target(self) -> float:
        return math.hypot(self.target[0] - self.pose.x, self.target[1] - self.pose.y)

    @property
    def theta_target(self) -> float:
        dx, dy = self.target[0] - self.pose.x, self.target[1] - self.pose.y
        return wrap_angle(math.atan2(dy, dx) - self.pose.theta)

    @property
    def done(self) -> bool:
        return self.status != RUNNING

    @property
    def success(self) -> int:
        return int(self.status == SUCCESS)


def step_kinematics(pose: Pose, action, dt: float) -> Pose:
    """Exact unicycle integration over one control period."""
    v, w = float(action[0]), float(action[1])
    th = pose.theta
    th1 = th + w * dt
    if abs(w) < 1e-9:
        x = pose.x + v * dt * math.cos(th)
        y = pose.y + v * dt * math.sin(th)
    else:
        r = v / w
        x = pose.x + r * (math.sin(th1) - math.sin(th))
        y = pose.y - r * (math.cos(th1) - math.cos(th))
    return Pose(x, y, wrap_angle(th1))


def target_polar(pose: Pose, target) -> tuple[float, float]:
    dx, dy = target[0] - pose.x, target[1] - pose.y
    return math.hypot(dx, dy), wrap_angle(math.atan2(dy, dx) - pose.theta)


def build_observation(
    scan_result: ScanResult,
    odom,
    pose: Pose,
    target,
    cfg: EpisodeConfig,
) -> Observation:
    pts = voxel_downsample(scan_result.points(), cfg.voxel) / cfg.rho_max
    norms = np.linalg.norm(pts, axis=1)
    over = norms > 1.0
    if over.any():
        # offset mounts can see slightly past rho_max from the robot centre
        pts[over] /= norms[over, None]
    rho, theta = target_polar(pose, target)
    return Observation(
        pcl=pts,
        odom=np.array([odom[0] / cfg.v_max_x, odom[1] / cfg.v_max_theta]),
        target=np.array([min(rho, cfg.rho_max_target) / cfg.rho_max_target, theta / math.pi]),
    )


def reward_terms(
    v_odom_x: float,
    theta_target: float,
    rho: float,
    rho_prev: float,
    min_range: float,
    cfg: RewardConfig,
) -> tuple[float, float, float, float]:
    """The (speed, target, fov, danger) parts of the dense reward."""
    r_speed = cfg.k_speed * v_odom_x * math.cos(theta_target)
    r_target = (cfg.k_target if rho < rho_prev else 0.0) - cfg.k_target_penalty
    r_fov = 0.0
    if cfg.use_fov and abs(theta_target) > cfg.theta_fov:
        r_fov = cfg.k_fov * math.cos(theta_target) - cfg.k_fov_penalty
    r_danger = 0.0
    if cfg.use_danger and min_range < cfg.rho_danger_thresh:
        r_danger = cfg.k_danger
    return r_speed, r_target, r_fov, r_danger


def shaped_reward(
    v_odom_x: float,
    theta_target: float,
    rho: float,
    rho_prev: float,
    min_range: float,
    cfg: RewardConfig,
) -> float:
    """Dense reward for a non-terminal step; ``v_odom_x`` is normalised."""
    r_speed, r_target, r_fov, r_danger = reward_terms(v_odom_x, theta_target, rho, rho_prev, min_range, cfg)
    return r_speed + r_target + r_fov + r_danger


def compute_reward(
    prev: EpisodeState,
    new: EpisodeState,
    scan_result: ScanResult | None,
    cfg: RewardConfig,
    *,
    collided: bool,
    episode_cfg: EpisodeConfig,
) -> tuple[float, str]:
    """Reward and resulting status. Collision wins over success."""
    if collided:
        return cfg.r_collision, COLLISION
    rho = new.rho_target
    if rho < episode_cfg.rho_thresh:
        return cfg.r_success, SUCCESS
    return sum(step_reward_terms(prev, new, scan_result, cfg, episode_cfg)), RUNNING


def step_reward_terms(prev, new, scan_result, cfg: RewardConfig, episode_cfg: EpisodeConfig):
    """Dense reward parts for the transition ``prev -> new`` (ignores terminal outcomes)."""
    min_range = scan_result.min_in_range() if scan_result is not None else math.inf
    return reward_terms(
        new.odom[0] / episode_cfg.v_max_x,
        new.theta_target,
        new.rho_target,
        prev.rho_target,
        min_range,
        cfg,
    )


def _blind_scan(mounts: Sequence[SensorMount]) -> ScanResult:
    n = sum(m.n for m in mounts)
    return ScanResult(
        ranges=np.array([m.below for m in mounts for _ in m.angles], dtype=float),
        angles=np.array([wrap_angle(m.theta + a) for m in mounts for a in m.angles], dtype=float),
        origins=np.array([(m.x, m.y) for m in mounts for _ in m.angles], dtype=float).reshape(n, 2),
        in_range=np.zeros(n, dtype=bool),
    )


@dataclass
class NavEnv:
    """Static bundle of everything an episode needs besides its state."""

    world: GridWorld
    mounts: Sequence[SensorMount]
    footprint: Footprint = field(default_factory=Footprint)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    inflation_radius: float | None = None

    def __post_init__(self):
        from .expert import GridPlanner

        self.bounds = ActionBounds(self.episode.v_max_x, self.episode.v_max_theta)
        radius = self.footprint.circumradius if self.inflation_radius is None else self.inflation_radius
        self.planner = GridPlanner(self.world, radius)

    def scan(self, pose: Pose) -> ScanResult:
        try:
            return scan(self.world, pose, self.mounts)
        except ValueError:
            return _blind_scan(self.mounts)

    def observe(self, state: EpisodeState, scan_result: ScanResult | None = None) -> Observation:
        if scan_result is None:
            scan_result = self.scan(state.pose)
        return build_observation(scan_result, state.odom, state.pose, state.target, self.episode)

    def start_is_safe(self, pose: Pose, substeps: int = 4) -> bool:
        """No action in the bounded box can collide within one control period."""
        if footprint_collides(self.world, pose, self.footprint):
            return False
        actions = self.bounds.corners() + [(self.bounds.v_max_x, 0.0)]
        dt = self.episode.dt
        for a in actions:
            for k in range(1, substeps + 1):
                p = step_kinematics(pose, a, dt * k / substeps)
                if footprint_collides(self.world, p, self.footprint):
                    return False
        return True

    def reset(self, rng: np.random.Generator) -> tuple[EpisodeState, Observation]:
        state = reset_episode(self, rng)
        return state, self.observe(state)

    def step(self, state: EpisodeState, action, rng: np.random.Generator | None = None):
        return env_step(self, state, action, rng)


def reset_episode(env: NavEnv, rng: np.random.Generator) -> EpisodeState:
    """Sample a safe start pose and a reachable target at least ``rho_init_thresh`` away."""
    cfg = env.episode
    planner = env.planner
    free = planner.free_cells
    if len(free) == 0:
        raise EpisodeSamplingError("world has no plannable free space")
    res = env.world.resolution
    for _ in range(cfg.max_reset_attempts):
        ix, iy = free[rng.integers(len(free))]
        ox, oy = env.world.origin
        x = ox + (ix + rng.random()) * res
        y = oy + (iy + rng.random()) * res
        pose = Pose(x, y, wrap_angle(rng.uniform(-math.pi, math.pi)))
        if not env.start_is_safe(pose):
            continue
        cand = planner.reachable_cells((ix, iy))
        centers = planner.centers[cand]
        d = np.hypot(centers[:, 0] - x, centers[:, 1] - y)
        ok = (d >= cfg.rho_init_thresh) & (d <= cfg.rho_max_target)
        if not ok.any():
            continue
        choices = np.flatnonzero(ok)
        tx, ty = centers[choices[rng.integers(len(choices))]]
        target = (float(tx), float(ty))
        state = EpisodeState(pose=pose, target=target, start=pose)
        return replace(state, rho_prev=state.rho_target)
    raise EpisodeSamplingError(f"no valid start/target pair after {cfg.max_reset_attempts} attempts")


def env_step(
    env: NavEnv,
    state: EpisodeState,
    action,
    rng: np.random.Generator | None = None,
) -> tuple[Observation, float, EpisodeState]:
    if state.status != RUNNING:
        raise UsageError(f"episode already ended with status {state.status!r}")
    cfg = env.episode
    cmd = env.bounds.clip(action)
    if cfg.velocity_lag > 0:
        alpha = 1.0 - math.exp(-cfg.dt / cfg.velocity_lag)
        executed = np.asarray(state.twist) + alpha * (cmd - np.asarray(state.twist))
    else:
        executed = cmd
    pose = step_kinematics(state.pose, executed, cfg.dt)
    odom = executed.copy()
    if cfg.odom_noise > 0 and rng is not None:
        odom = odom + rng.normal(0.0, cfg.odom_noise, size=2)
    new = replace(
        state,
        pose=pose,
        t=state.t + 1,
        rho_prev=state.rho_target,
        twist=(float(executed[0]), float(executed[1])),
        odom=(float(odom[0]), float(odom[1])),
        travelled=state.travelled + abs(float(executed[0])) * cfg.dt,
    )
    collided = footprint_collides(env.world, pose, env.footprint)
    sc = env.scan(pose)
    reward, status = compute_reward(state, new, sc, env.reward, collided=collided, episode_cfg=cfg)
    terms = (0.0, 0.0, 0.0, 0.0)
    if status == RUNNING:
        terms = step_reward_terms(state, new, sc, env.reward, cfg)
        if new.t >= cfg.max_steps:
            status = TIMEOUT
    new = replace(new, status=status, terms=terms)
    obs = build_observation(sc, new.odom, pose, new.target, cfg)
    return obs, reward, new


TRACE_COLUMNS = ["t", "x", "y", "theta", "v_cmd_x", "v_cmd_theta", "reward", "rho_target", "status"]


def trace_row(state: EpisodeState, action, reward: float) -> dict:
    return {
        "t": state.t,
        "x": state.pose.x,
        "y": state.pose.y,
        "theta": state.pose.theta,
        "v_cmd_x": float(action[0]),
        "v_cmd_theta": float(action[1]),
        "reward": reward,
        "rho_target": state.rho_target,
        "status": state.status,
    }


def write_episode_trace(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
