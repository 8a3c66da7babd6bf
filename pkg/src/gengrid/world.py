"""Continuous 2D physical layer on top of the lattice.

Geometry convention: world x grows east (along columns), y grows south (along
rows, image-style), origin at the grid's NW corner. Heading theta is measured
from +x with standard rotation matrices, normalized to [-pi, pi); facing north
is theta = -pi/2. A robot's left side is -y in its body frame under this
convention.

Robots are differential-drive discs integrated open loop: timed wheel-duty
commands, optional Gaussian heading noise, no position feedback anywhere.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .grid import CENTER, CellId, Grid, Side, build_grid

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Heading angle for each cardinal side under the y-south convention.
SIDE_ANGLE = {
    Side.N: -math.pi / 2,
    Side.E: 0.0,
    Side.S: math.pi / 2,
    Side.W: -math.pi,
}


def normalize_angle(a: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


def nearest_side(theta: float) -> Side:
    """Cardinal side closest to a heading angle."""
    idx = round(normalize_angle(theta) / (math.pi / 2)) % 4
    return {0: Side.E, 1: Side.S, 2: Side.W, 3: Side.N}[idx]


@dataclass(slots=True)
class NoiseModel:
    """Open-loop actuation noise.

    sigma_rot: heading error std-dev added once per commanded rotation (rad).
    sigma_drive: heading random-walk std-dev per sqrt(mm) of straight travel.
    duty_mismatch: std-dev of the per-command left/right speed imbalance.
    All zero means bitwise-deterministic kinematics.
    """

    sigma_rot: float = 0.0
    sigma_drive: float = 0.0
    duty_mismatch: float = 0.0

    def __post_init__(self):
        for name in ("sigma_rot", "sigma_drive", "duty_mismatch"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def is_zero(self) -> bool:
        return self.sigma_rot == 0 and self.sigma_drive == 0 and self.duty_mismatch == 0

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def calibrated(cls) -> "NoiseModel":
        """The checked-in model produced by the noise calibration search."""
        text = resources.files("gengrid").joinpath("data", "calibrated_noise.json").read_text()
        payload = json.loads(text)
        return cls(
            sigma_rot=payload["sigma_rot"],
            sigma_drive=payload["sigma_drive"],
            duty_mismatch=payload.get("duty_mismatch", 0.0),
        )


@dataclass(slots=True)
class KinematicConstants:
    """Motor and chassis constants shared by integration and hop planning."""

    v_max: float = 150.0       # mm/s at 100% duty
    wheel_base: float = 100.0  # mm between wheel contact points
    hop_duty: float = 50.0     # duty used for hop rotations and drives
    settle_ms: float = 200.0   # sensor-stabilization pause between hops

    @property
    def hop_speed(self) -> float:
        return self.hop_duty / 100.0 * self.v_max

    @property
    def rotation_rate(self) -> float:
        """rad/s of an opposing-duty rotation at hop_duty."""
        return 2.0 * self.hop_speed / self.wheel_base

    def drive_ms(self, distance_mm: float) -> float:
        return distance_mm / self.hop_speed * 1000.0

    def rotation_ms(self, dtheta: float) -> float:
        return abs(dtheta) / self.rotation_rate * 1000.0


DEFAULT_KIN = KinematicConstants()


@dataclass(slots=True)
class WorldConfig:
    rows: int
    cols: int
    cell_pitch: float = 75.0  # mm
    tick_dt: float = 10.0     # ms
    noise: NoiseModel = field(default_factory=NoiseModel)
    kin: KinematicConstants = field(default_factory=KinematicConstants)
    bleed: float = 0.0        # optional inter-cell optical bleed, 0 = clean per-cell light

    def __post_init__(self):
        if self.cell_pitch <= 0:
            raise ValueError("cell_pitch must be > 0")
        if self.tick_dt <= 0:
            raise ValueError("tick_dt must be > 0")

    @property
    def extent(self) -> tuple[float, float]:
        """(width, height) of the platform in mm."""
        return self.cols * self.cell_pitch, self.rows * self.cell_pitch


@dataclass(slots=True)
class Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        self.theta = normalize_angle(self.theta)


@dataclass(slots=True)
class MagnetSpec:
    diameter: float = 20.0
    strength: float = 1.0
    detect_radius: float = 37.5

    def __post_init__(self):
        if self.detect_radius <= 0:
            raise ValueError("detect_radius must be > 0")
        if not 0.0 < self.strength <= 1.0:
            raise ValueError("strength must be in (0, 1]")


@dataclass(slots=True)
class FreeMagnet:
    x: float
    y: float
    spec: MagnetSpec = field(default_factory=MagnetSpec)


@dataclass(slots=True)
class MotionCommand:
    left_duty: float
    right_duty: float
    duration: float  # ms remaining; expires to idle at 0

    def __post_init__(self):
        if abs(self.left_duty) > 100 or abs(self.right_duty) > 100:
            raise ValueError("wheel duty outside -100..100")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")

    @property
    def is_rotation(self) -> bool:
        return self.left_duty == -self.right_duty and self.left_duty != 0

    @property
    def is_straight(self) -> bool:
        return self.left_duty == self.right_duty and self.left_duty != 0

    @property
    def is_idle(self) -> bool:
        return self.left_duty == 0 and self.right_duty == 0


@dataclass(slots=True)
class SensorFrame:
    """The five onboard light readings, in the robot's body frame."""

    center: int
    front: int
    back: int
    left: int
    right: int

    def __getitem__(self, name: str) -> int:
        return getattr(self, name)


def body_sensor_offsets(pitch: float) -> dict[str, tuple[float, float]]:
    """Body-frame sensor positions: peripherals one pitch out so they sample
    the four neighboring cells when the robot sits on a cell center."""
    return {
        "center": (0.0, 0.0),
        "front": (pitch, 0.0),
        "back": (-pitch, 0.0),
        "left": (0.0, -pitch),   # -y is the robot's left under y-south axes
        "right": (0.0, pitch),
    }


@dataclass
class Robot:
    id: str
    pose: Pose
    sensors: dict[str, tuple[float, float]]
    chassis_diameter: float = 122.0
    magnet: MagnetSpec = field(default_factory=MagnetSpec)
    motion: Optional[MotionCommand] = None
    plan: list[MotionCommand] = field(default_factory=list)
    behavior_kind: Optional[str] = None
    behavior_params: dict = field(default_factory=dict)
    behavior_state: object = None
    mismatch: float = 0.0  # per-command wheel imbalance, sampled at command start

    @property
    def idle(self) -> bool:
        return self.motion is None and not self.plan


class World:
    """Single source of simulated physical truth: lattice geometry, robots,
    the optional free shepherd magnet, and the tick clock."""

    def __init__(self, config: WorldConfig, grid: Optional[Grid] = None):
        self.config = config
        self.grid = grid if grid is not None else build_grid(config.rows, config.cols)
        if self.grid.rows != config.rows or self.grid.cols != config.cols:
            raise ValueError("grid dimensions disagree with world config")
        self.robots: list[Robot] = []
        self.free_magnet: Optional[FreeMagnet] = None
        self.tick = 0
        self._hall_cells: set[CellId] = set()

    # -- construction -----------------------------------------------------

    def add_robot(self, rid: str, row: int, col: int, heading: Side | float = Side.E,
                  magnet: Optional[MagnetSpec] = None) -> Robot:
        x, y = self.cell_center(CellId(row, col))
        theta = SIDE_ANGLE[heading] if isinstance(heading, Side) else float(heading)
        robot = Robot(
            id=rid,
            pose=Pose(x, y, theta),
            sensors=body_sensor_offsets(self.config.cell_pitch),
            magnet=magnet if magnet is not None else MagnetSpec(),
        )
        self.robots.append(robot)
        return robot

    # -- geometry -----------------------------------------------------------

    def cell_center(self, cid) -> tuple[float, float]:
        p = self.config.cell_pitch
        return (cid[1] + 0.5) * p, (cid[0] + 0.5) * p

    def cell_at(self, x: float, y: float) -> Optional[CellId]:
        """Cell containing a point; boundary points belong to the larger
        row/col index, points outside the platform map to None."""
        p = self.config.cell_pitch
        col = math.floor(x / p)
        row = math.floor(y / p)
        if 0 <= row < self.config.rows and 0 <= col < self.config.cols:
            return CellId(row, col)
        return None

    def occupancy_cell(self, robot: Robot) -> CellId:
        """Cell under a robot's center; the far boundary folds into the edge
        cell (poses are clamped to the platform, so this is always in-grid)."""
        p = self.config.cell_pitch
        col = min(int(robot.pose.x // p), self.config.cols - 1)
        row = min(int(robot.pose.y // p), self.config.rows - 1)
        return CellId(max(row, 0), max(col, 0))

    # -- sensing ------------------------------------------------------------

    def light_at(self, x: float, y: float) -> int:
        cid = self.cell_at(x, y)
        if cid is None:
            return 0
        value = self.grid.cells[cid.row][cid.col].leds.pwm[CENTER]
        bleed = self.config.bleed
        if bleed > 0.0:
            nb = [self.grid.cells[n.row][n.col].leds.pwm[CENTER]
                  for _, n in self.grid.neighbors(cid)]
            mixed = (1.0 - bleed) * value + bleed * (sum(nb) / len(nb) if nb else 0.0)
            return int(round(mixed))
        return value

    def robot_readings(self, robot: Robot) -> SensorFrame:
        th = robot.pose.theta
        c, s = math.cos(th), math.sin(th)
        px, py = robot.pose.x, robot.pose.y
        vals = {}
        for name, (bx, by) in robot.sensors.items():
            vals[name] = self.light_at(px + c * bx - s * by, py + s * bx + c * by)
        return SensorFrame(**vals)

    def _magnets(self):
        for robot in self.robots:
            yield robot.pose.x, robot.pose.y, robot.magnet
        if self.free_magnet is not None:
            yield self.free_magnet.x, self.free_magnet.y, self.free_magnet.spec

    def hall_level_at(self, cid) -> float:
        """Linear-cone field strength at a cell center, max over all magnets."""
        cx, cy = self.cell_center(cid)
        best = 0.0
        for mx, my, spec in self._magnets():
            d = math.hypot(mx - cx, my - cy)
            if d < spec.detect_radius:
                level = spec.strength * (1.0 - d / spec.detect_radius)
                if level > best:
                    best = level
        return best

    def refresh_hall(self) -> None:
        """Push magnet-derived hall levels onto the cells near any magnet."""
        p = self.config.cell_pitch
        current: dict[CellId, float] = {}
        for mx, my, spec in self._magnets():
            reach = spec.detect_radius
            r0 = max(0, math.floor((my - reach) / p))
            r1 = min(self.config.rows - 1, math.floor((my + reach) / p))
            c0 = max(0, math.floor((mx - reach) / p))
            c1 = min(self.config.cols - 1, math.floor((mx + reach) / p))
            for r in range(r0, r1 + 1):
                for c in range(c0, c1 + 1):
                    cx, cy = (c + 0.5) * p, (r + 0.5) * p
                    d = math.hypot(mx - cx, my - cy)
                    if d < reach:
                        level = spec.strength * (1.0 - d / reach)
                        cid = CellId(r, c)
                        if level > current.get(cid, 0.0):
                            current[cid] = level
        for cid in self._hall_cells - current.keys():
            self.grid.cells[cid.row][cid.col].hall = 0.0
        for cid, level in current.items():
            self.grid.cells[cid.row][cid.col].hall = level
        self._hall_cells = set(current)

    # -- free magnet (the shepherd agent) -------------------------------------

    def place_free_magnet(self, x: float, y: float,
                          spec: Optional[MagnetSpec] = None) -> "World":
        keep = spec if spec is not None else (
            self.free_magnet.spec if self.free_magnet else MagnetSpec())
        self.free_magnet = FreeMagnet(float(x), float(y), keep)
        return self

    def move_free_magnet(self, x: float, y: float) -> bool:
        if self.free_magnet is None:
            log.warning("move_free_magnet with no magnet placed; ignored")
            return False
        self.free_magnet.x = float(x)
        self.free_magnet.y = float(y)
        return True

    def remove_free_magnet(self) -> bool:
        if self.free_magnet is None:
            log.warning("remove_free_magnet with no magnet placed; ignored")
            return False
        self.free_magnet = None
        return True

    # -- kinematics -----------------------------------------------------------

    def advance(self, rng) -> "World":
        """Integrate one tick of every robot's active command.

        All randomness comes from `rng`; with a zero NoiseModel no draws are
        made and trajectories are bitwise deterministic.
        """
        dt_ms = self.config.tick_dt
        before = [(r.pose.x, r.pose.y) for r in self.robots]
        for robot in self.robots:
            if robot.motion is None and robot.plan:
                robot.motion = robot.plan.pop(0)
                self._on_command_start(robot, rng)
            cmd = robot.motion
            if cmd is None:
                continue
            step_ms = min(dt_ms, cmd.duration)
            if step_ms > 0.0 and not cmd.is_idle:
                self._integrate(robot, cmd, step_ms, rng)
            cmd.duration -= step_ms
            if cmd.duration <= 1e-9:
                robot.motion = None
        self._resolve_collisions(before)
        self.tick += 1
        return self

    def _on_command_start(self, robot: Robot, rng) -> None:
        noise = self.config.noise
        cmd = robot.motion
        robot.mismatch = 0.0
        if cmd.is_idle or cmd.duration <= 0.0:
            return
        if noise.duty_mismatch > 0.0:
            robot.mismatch = float(rng.normal(0.0, noise.duty_mismatch))
        if cmd.is_rotation and noise.sigma_rot > 0.0:
            kick = float(rng.normal(0.0, noise.sigma_rot))
            robot.pose.theta = normalize_angle(robot.pose.theta + kick)

    def _integrate(self, robot: Robot, cmd: MotionCommand, step_ms: float, rng) -> None:
        kin = self.config.kin
        noise = self.config.noise
        h = step_ms / 1000.0
        vl = cmd.left_duty / 100.0 * kin.v_max * (1.0 + robot.mismatch)
        vr = cmd.right_duty / 100.0 * kin.v_max * (1.0 - robot.mismatch)
        pose = robot.pose
        if vl == vr:
            dist = vl * h
            if noise.sigma_drive > 0.0 and dist != 0.0:
                drift = float(rng.normal(0.0, noise.sigma_drive * math.sqrt(abs(dist))))
                pose.theta = normalize_angle(pose.theta + drift)
            pose.x += dist * math.cos(pose.theta)
            pose.y += dist * math.sin(pose.theta)
        elif vl == -vr:
            omega = (vr - vl) / kin.wheel_base
            pose.theta = normalize_angle(pose.theta + omega * h)
        else:
            v = 0.5 * (vl + vr)
            omega = (vr - vl) / kin.wheel_base
            if abs(omega) < 1e-12:
                pose.x += v * h * math.cos(pose.theta)
                pose.y += v * h * math.sin(pose.theta)
            else:
                radius = v / omega
                th1 = pose.theta + omega * h
                pose.x += radius * (math.sin(th1) - math.sin(pose.theta))
                pose.y -= radius * (math.cos(th1) - math.cos(pose.theta))
                pose.theta = normalize_angle(th1)
        # Clamp a hair inside the platform: a pose exactly on the rim puts
        # point sensors a rounding error outside the grid.
        w, hgt = self.config.extent
        eps = 1e-9
        pose.x = min(max(pose.x, eps), w - eps)
        pose.y = min(max(pose.y, eps), hgt - eps)

    def _resolve_collisions(self, before: list[tuple[float, float]]) -> None:
        n = len(self.robots)
        for i in range(n):
            for j in range(i + 1, n):
                a, b = self.robots[i], self.robots[j]
                limit = 0.5 * (a.chassis_diameter + b.chassis_diameter)
                if math.hypot(a.pose.x - b.pose.x, a.pose.y - b.pose.y) < limit:
                    a.pose.x, a.pose.y = before[i]
                    b.pose.x, b.pose.y = before[j]
                    for r in (a, b):
                        r.motion = None
                        r.plan.clear()


def advance(world: World, rng) -> World:
    return world.advance(rng)


def hall_level_at(world: World, cid) -> float:
    return world.hall_level_at(cid)


def light_at(world: World, x: float, y: float) -> int:
    return world.light_at(x, y)


def robot_readings(world: World, robot: Robot) -> SensorFrame:
    return world.robot_readings(robot)
