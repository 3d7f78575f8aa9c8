"""Static occupancy-grid worlds, simulated 2D LiDAR and footprint collision queries.

Cells are addressed as ``(ix, iy)`` with ``iy = 0`` at the bottom (minimum y) of
the map. The text format lists rows top-down, so text row ``r`` is ``iy = H-1-r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import MapParseError

FREE_CHAR = "."
OCCUPIED_CHAR = "#"


@dataclass(frozen=True)
class GridWorld:
    resolution: float
    occupied: np.ndarray  # bool, shape (height, width), indexed [iy, ix]
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        occ = np.array(self.occupied, dtype=bool)
        if occ.ndim != 2 or occ.shape[0] < 1 or occ.shape[1] < 1:
            raise ValueError("occupancy grid must be a non-empty 2D array")
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the mapped area in world coordinates."""
        ox, oy = self.origin
        return ox, oy, ox + self.width * self.resolution, oy + self.height * self.resolution

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        """Cell containing a world point, or ``None`` when out of bounds."""
        ix = math.floor((x - self.origin[0]) / self.resolution)
        iy = math.floor((y - self.origin[1]) / self.resolution)
        if 0 <= ix < self.width and 0 <= iy < self.height:
            return ix, iy
        return None

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        r = self.resolution
        return self.origin[0] + (ix + 0.5) * r, self.origin[1] + (iy + 0.5) * r

    def cell_index(self, ix: int, iy: int) -> int:
        return iy * self.width + ix

    def is_occupied(self, x: float, y: float) -> bool:
        cell = self.cell_of(x, y)
        if cell is None:
            return True
        return bool(self.occupied[cell[1], cell[0]])

    @cached_property
    def flat(self) -> bytes:
        """Row-major occupancy bytes; fast scalar lookups for the ray caster."""
        return self.occupied.astype(np.uint8).tobytes()

    @property
    def free_count(self) -> int:
        return int((~self.occupied).sum())


def load_map(text: str) -> GridWorld:
    """Parse the plain-text map format.

    ::

        resolution: 0.1
        origin: 0.0 0.0
        grid:
        #####
        #...#
        #####
    """
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise MapParseError("empty map text", line=1)

    resolution = None
    origin = (0.0, 0.0)
    grid_start = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise MapParseError(f"expected 'key: value' header, got {raw!r}", line=lineno)
        key = key.strip()
        if key == "resolution":
            try:
                resolution = float(value)
            except ValueError:
                raise MapParseError(f"bad resolution {value.strip()!r}", line=lineno) from None
            if not resolution > 0:
                raise MapParseError("resolution must be positive", line=lineno)
        elif key == "origin":
            parts = value.split()
            try:
                if len(parts) != 2:
                    raise ValueError
                origin = (float(parts[0]), float(parts[1]))
            except ValueError:
                raise MapParseError(f"bad origin {value.strip()!r}", line=lineno) from None
        elif key == "grid":
            if value.strip():
                raise MapParseError("'grid:' must stand on its own line", line=lineno)
            grid_start = lineno
            break
        else:
            raise MapParseError(f"unknown header key {key!r}", line=lineno)

    if resolution is None:
        raise MapParseError("missing 'resolution' header")
    if grid_start is None:
        raise MapParseError("missing 'grid:' section")

    rows = []
    width = None
    for lineno in range(grid_start + 1, len(lines) + 1):
        row = lines[lineno - 1].rstrip("\r\n")
        if not row.strip():
            # trailing blank lines are allowed, interior ones are not
            if any(l.strip() for l in lines[lineno:]):
                raise MapParseError("blank line inside grid", line=lineno)
            break
        bad = set(row) - {FREE_CHAR, OCCUPIED_CHAR}
        if bad:
            raise MapParseError(f"unknown cell character(s) {sorted(bad)!r}", line=lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MapParseError(f"row has {len(row)} cells, expected {width}", line=lineno)
        rows.append([c == OCCUPIED_CHAR for c in row])
    if not rows:
        raise MapParseError("grid section has no rows", line=grid_start)

    occupied = np.array(rows[::-1], dtype=bool)
    return GridWorld(resolution=resolution, occupied=occupied, origin=origin)


def save_map(world: GridWorld) -> str:
    out = [
        f"resolution: {world.resolution!r}",
        f"origin: {world.origin[0]!r} {world.origin[1]!r}",
        "grid:",
    ]
    for iy in range(world.height - 1, -1, -1):
        out.append("".join(OCCUPIED_CHAR if c else FREE_CHAR for c in world.occupied[iy]))
    return "\n".join(out) + "\n"


def read_map(path) -> GridWorld:
    with open(path, encoding="utf-8") as fh:
        return load_map(fh.read())


# ---------------------------------------------------------------------------
# Ray casting


@dataclass(frozen=True)
class SensorMount:
    """A 2D range sensor rigidly attached to the robot.

    ``below`` and ``above`` are the codes returned for hits closer than
    ``rho_min`` and for beams with no hit within ``rho_max``.
    """

    angles: tuple[float, ...]
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    rho_min: float = 0.1
    rho_max: float = 18.0
    below: float = -math.inf
    above: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if not self.rho_min < self.rho_max:
            raise ValueError("rho_min must be smaller than rho_max")
        a = np.asarray(self.angles)
        if a.size and (np.any(np.diff(a) <= 0) or a[0] <= -math.pi or a[-1] > math.pi):
            raise ValueError("beam angles must be strictly increasing within (-pi, pi]")

    @property
    def n(self) -> int:
        return len(self.angles)

    def in_range(self, reading: float) -> bool:
        return self.rho_min <= reading <= self.rho_max


def uniform_angles(n: int, fov: float = 2 * math.pi) -> tuple[float, ...]:
    """``n`` evenly spaced beam angles covering ``fov`` radians, centred on 0."""
    if fov >= 2 * math.pi:
        step = 2 * math.pi / n
        return tuple(-math.pi + step * (i + 1) for i in range(n))
    if n == 1:
        return (0.0,)
    return tuple(np.linspace(-fov / 2, fov / 2, n))


def single_360_mount(n_beams: int = 32, rho_min: float = 0.1, rho_max: float = 18.0) -> list[SensorMount]:
    return [SensorMount(angles=uniform_angles(n_beams), rho_min=rho_min, rho_max=rho_max)]


def dual_270_mounts(
    n_beams: int = 1081,
    offset: float = 0.4,
    rho_min: float = 0.1,
    rho_max: float = 18.0,
) -> list[SensorMount]:
    """Front and rear 270 degree scanners, the rear one facing backwards."""
    angles = uniform_angles(n_beams, fov=1.5 * math.pi)
    return [
        SensorMount(angles=angles, x=offset, rho_min=rho_min, rho_max=rho_max),
        SensorMount(angles=angles, x=-offset, theta=math.pi, rho_min=rho_min, rho_max=rho_max),
    ]


def raycast(
    world: GridWorld,
    x: float,
    y: float,
    angle: float,
    rho_min: float,
    rho_max: float,
    below: float = -math.inf,
    above: float = math.inf,
) -> float:
    """Distance from ``(x, y)`` to the first occupied cell boundary along ``angle``.

    Grid traversal visits every cell the ray crosses. Rays that leave the map
    see nothing (walls at infinity) and return ``above``.
    """
    res = world.resolution
    occ = world.flat
    w, h = world.width, world.height
    gx = (x - world.origin[0]) / res
    gy = (y - world.origin[1]) / res
    ix, iy = math.floor(gx), math.floor(gy)
    if not (0 <= ix < w and 0 <= iy < h) or occ[iy * w + ix]:
        raise ValueError(f"ray origin ({x:.3f}, {y:.3f}) is not in a free cell")

    dx, dy = math.cos(angle), math.sin(angle)
    if dx > 0:
        step_x, t_max_x, t_dx = 1, (ix + 1 - gx) / dx * res, res / dx
    elif dx < 0:
        step_x, t_max_x, t_dx = -1, (gx - ix) / -dx * res, res / -dx
    else:
        step_x, t_max_x, t_dx = 0, math.inf, math.inf
    if dy > 0:
        step_y, t_max_y, t_dy = 1, (iy + 1 - gy) / dy * res, res / dy
    elif dy < 0:
        step_y, t_max_y, t_dy = -1, (gy - iy) / -dy * res, res / -dy
    else:
        step_y, t_max_y, t_dy = 0, math.inf, math.inf

    while True:
        if t_max_x < t_max_y:
            ix += step_x
            t = t_max_x
            t_max_x += t_dx
        else:
            iy += step_y
            t = t_max_y
            t_max_y += t_dy
        if t > rho_max or not (0 <= ix < w and 0 <= iy < h):
            return above
        if occ[iy * w + ix]:
            return below if t < rho_min else t


@dataclass(frozen=True)
class ScanResult:
    """Readings of every beam, ordered by mount then by angle.

    ``angles`` are beam directions in the robot frame and ``origins`` the
    robot-frame position of the emitting sensor.
    """

    ranges: np.ndarray
    angles: np.ndarray
    origins: np.ndarray
    in_range: np.ndarray

    def __len__(self):
        return len(self.ranges)

    def __iter__(self):
        return iter(zip(self.ranges.tolist(), self.angles.tolist()))

    def points(self) -> np.ndarray:
        """Robot-frame hit points of the in-range beams, shape (k, 2)."""
        m = self.in_range
        r = self.ranges[m]
        a = self.angles[m]
        return self.origins[m] + np.stack([r * np.cos(a), r * np.sin(a)], axis=1)

    def min_in_range(self) -> float:
        return float(self.ranges[self.in_range].min()) if self.in_range.any() else math.inf


def scan(world: GridWorld, pose, mounts: Sequence[SensorMount]) -> ScanResult:
    """Simulate all mounts at a robot pose ``(x, y, theta)``."""
    px, py, pth = pose[0], pose[1], pose[2]
    c, s = math.cos(pth), math.sin(pth)
    ranges, angles, origins, valid = [], [], [], []
    for m in mounts:
        wx = px + c * m.x - s * m.y
        wy = py + s * m.x + c * m.y
        for a in m.angles:
            beam = wrap_angle(m.theta + a)
            r = raycast(world, wx, wy, pth + beam, m.rho_min, m.rho_max, m.below, m.above)
            ranges.append(r)
            angles.append(beam)
            origins.append((m.x, m.y))
            valid.append(m.rho_min <= r <= m.rho_max)
    return ScanResult(
        ranges=np.array(ranges, dtype=float),
        angles=np.array(angles, dtype=float),
        origins=np.array(origins, dtype=float).reshape(-1, 2),
        in_range=np.array(valid, dtype=bool),
    )


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    if -math.pi < a <= math.pi:
        return a
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


# ---------------------------------------------------------------------------
# Footprint collisions


@dataclass(frozen=True)
class Footprint:
    length: float = 1.1
    width: float = 0.8

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError("footprint dimensions must be positive")

    @property
    def circumradius(self) -> float:
        return math.hypot(self.length / 2, self.width / 2)

    def corners(self, pose) -> np.ndarray:
        x, y, th = pose[0], pose[1], pose[2]
        hl, hw = self.length / 2, self.width / 2
        local = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
        c, s = math.cos(th), math.sin(th)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([x, y])


def footprint_collides(world: GridWorld, pose, footprint: Footprint) -> bool:
    """Whether the oriented footprint rectangle touches an occupied or off-map cell."""
    x, y, th = pose[0], pose[1], pose[2]
    xmin, ymin, xmax, ymax = world.extent
    corners = footprint.corners(pose)
    if (
        corners[:, 0].min() < xmin
        or corners[:, 0].max() > xmax
        or corners[:, 1].min() < ymin
        or corners[:, 1].max() > ymax
    ):
        return True

    res = world.resolution
    ox, oy = world.origin
    ix0 = max(math.floor((corners[:, 0].min() - ox) / res), 0)
    ix1 = min(math.floor((corners[:, 0].max() - ox) / res), world.width - 1)
    iy0 = max(math.floor((corners[:, 1].min() - oy) / res), 0)
    iy1 = min(math.floor((corners[:, 1].max() - oy) / res), world.height - 1)
    window = world.occupied[iy0 : iy1 + 1, ix0 : ix1 + 1]
    if not window.any():
        return False
    jy, jx = np.nonzero(window)
    qx = ox + (jx + ix0 + 0.5) * res - x
    qy = oy + (jy + iy0 + 0.5) * res - y

    # separating axis test between the rectangle and each square cell
    hl, hw, hs = footprint.length / 2, footprint.width / 2, res / 2
    c, s = math.cos(th), math.sin(th)
    ac, as_ = abs(c), abs(s)
    sep = np.abs(qx) > hl * ac + hw * as_ + hs
    sep |= np.abs(qy) > hl * as_ + hw * ac + hs
    sep |= np.abs(qx * c + qy * s) > hl + hs * (ac + as_)
    sep |= np.abs(-qx * s + qy * c) > hw + hs * (ac + as_)
    return bool((~sep).any())


# ---------------------------------------------------------------------------
# Point clouds


def voxel_downsample(points, voxel: float) -> np.ndarray:
    """Replace the points in each occupied voxel by their centroid.

    Output rows are sorted by voxel index (x index first, then y).
    """
    if not voxel > 0:
        raise ValueError("voxel size must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return pts.copy()
    keys = np.floor(pts / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(counts), 2))
    np.add.at(sums, inverse, pts)
    return sums / counts[:, None]


@dataclass(frozen=True)
class WorldBuilder:
    """Small helper for composing rectangular test worlds in metres."""

    width_m: float
    height_m: float
    resolution: float = 0.1
    walls: bool = True
    boxes: list = field(default_factory=list)

    def build(self) -> GridWorld:
        w = int(round(self.width_m / self.resolution))
        h = int(round(self.height_m / self.resolution))
        occ = np.zeros((h, w), dtype=bool)
        if self.walls:
            occ[0, :] = occ[-1, :] = True
            occ[:, 0] = occ[:, -1] = True
        for x0, y0, x1, y1 in self.boxes:
            i0, i1 = int(round(x0 / self.resolution)), int(round(x1 / self.resolution))
            j0, j1 = int(round(y0 / self.resolution)), int(round(y1 / self.resolution))
            occ[j0:j1, i0:i1] = True
        return GridWorld(resolution=self.resolution, occupied=occ)


def occupied_cells(world: GridWorld) -> Iterable[tuple[int, int]]:
    iy, ix = np.nonzero(world.occupied)
    return zip(ix.tolist(), iy.tolist())
