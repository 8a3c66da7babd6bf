"""Declarative experiment definitions and the seeded trial runner.

A scenario file is a JSON document (schema-versioned, unknown fields
rejected) describing the grid program layout, robots, the optional scripted
shepherd magnet, trial count and the success predicate. Trials derive their
RNG seed from (scenario seed, start variant, trial index) with a stable hash,
so trial sets don't shift when the trial count changes.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import telemetry
from .behaviors import BehaviorKind, BehaviorState, decide
from .grid import CENTER, CellId, CellProgram, ProgramKind, Side
from .world import MagnetSpec, NoiseModel, World, WorldConfig, nearest_side

SCHEMA_VERSION = 1

BUILTIN_NAMES = (
    "sensor_validation",
    "single_hop",
    "path2d",
    "wall_avoid",
    "transport",
    "shepherding",
    "pheromone",
)

SCENARIO_PATH_ENV = "GENGRID_SCENARIO_PATH"


class ScenarioError(Exception):
    """Malformed or semantically invalid scenario document."""


# --- spec dataclasses --------------------------------------------------------


@dataclass
class RobotSpec:
    id: str
    row: int
    col: int
    heading: Side
    behavior: BehaviorKind
    params: dict = field(default_factory=dict)


@dataclass
class StartVariant:
    row: int
    col: int
    heading: Side
    target: Optional[CellId] = None


@dataclass
class CellEntry:
    at: CellId
    program: CellProgram


@dataclass
class MagnetEvent:
    tick: int
    x: Optional[float] = None
    y: Optional[float] = None
    remove: bool = False


@dataclass
class MagnetScript:
    events: list[MagnetEvent] = field(default_factory=list)
    spec: MagnetSpec = field(default_factory=MagnetSpec)
    interactive: bool = False


@dataclass
class SuccessSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ScenarioSpec:
    name: str
    rows: int
    cols: int
    figure: str = ""
    cell_pitch: float = 75.0
    tick_dt: float = 10.0
    noise: NoiseModel | str = "none"
    default_program: CellProgram = field(default_factory=lambda: CellProgram(ProgramKind.INERT))
    cells: list[CellEntry] = field(default_factory=list)
    robots: list[RobotSpec] = field(default_factory=list)
    start_variants: list[StartVariant] = field(default_factory=list)
    magnet: Optional[MagnetScript] = None
    duration_ticks: int = 100
    trials: int = 1
    seed: int = 0
    success: SuccessSpec = field(default_factory=lambda: SuccessSpec("none"))

    def variants(self) -> list[StartVariant]:
        if self.start_variants:
            return self.start_variants
        if self.robots:
            r = self.robots[0]
            return [StartVariant(r.row, r.col, r.heading)]
        return [StartVariant(0, 0, Side.E)]

    def resolved_noise(self) -> NoiseModel:
        if isinstance(self.noise, NoiseModel):
            return self.noise
        if self.noise == "none":
            return NoiseModel.none()
        if self.noise == "calibrated":
            return NoiseModel.calibrated()
        raise ScenarioError(f"unknown noise setting {self.noise!r}")

    def with_overrides(self, *, trials: Optional[int] = None, seed: Optional[int] = None,
                       noise: Optional[NoiseModel | str] = None,
                       duration_ticks: Optional[int] = None,
                       heading: Optional[Side] = None) -> "ScenarioSpec":
        """Copy with runtime overrides (CLI flags, property suites)."""
        spec = copy.deepcopy(self)
        if trials is not None:
            spec.trials = trials
        if seed is not None:
            spec.seed = seed
        if noise is not None:
            spec.noise = noise
        if duration_ticks is not None:
            spec.duration_ticks = duration_ticks
        if heading is not None:
            for robot in spec.robots:
                robot.heading = heading
            for variant in spec.start_variants:
                variant.heading = heading
        return spec

    def build_world(self, variant_index: int = 0) -> World:
        noise = self.resolved_noise()
        config = WorldConfig(rows=self.rows, cols=self.cols, cell_pitch=self.cell_pitch,
                             tick_dt=self.tick_dt, noise=noise)
        world = World(config)
        for entry in self.cells:
            world.grid.set_program(entry.at, entry.program)
        if self.default_program.kind is not ProgramKind.INERT:
            covered = {entry.at for entry in self.cells}
            for cell in world.grid.all_cells():
                if cell.id not in covered:
                    world.grid.set_program(cell.id, self.default_program)
        variants = self.variants()
        variant = variants[variant_index]
        for i, rspec in enumerate(self.robots):
            row, col, heading = rspec.row, rspec.col, rspec.heading
            if i == 0:
                row, col, heading = variant.row, variant.col, variant.heading
            robot = world.add_robot(rspec.id, row, col, heading)
            robot.behavior_kind = rspec.behavior
            robot.behavior_params = dict(rspec.params)
            robot.behavior_state = BehaviorState()
        return world


# --- document loading ---------------------------------------------------------


def _expect_keys(obj: dict, allowed: set[str], required: set[str], where: str,
                 errors: list[str]) -> None:
    for key in obj:
        if key not in allowed:
            errors.append(f"{where}: unknown field {key!r}")
    for key in required:
        if key not in obj:
            errors.append(f"{where}: missing required field {key!r}")


def _parse_cell_id(value, where: str, errors: list[str]) -> Optional[CellId]:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) for v in value)):
        errors.append(f"{where}: expected [row, col] pair, got {value!r}")
        return None
    return CellId(value[0], value[1])


def _parse_side(value, where: str, errors: list[str]) -> Side:
    try:
        return Side[value]
    except (KeyError, TypeError):
        errors.append(f"{where}: heading must be one of N/E/S/W, got {value!r}")
        return Side.E


def _parse_program(obj, where: str, errors: list[str]) -> CellProgram:
    if isinstance(obj, str):
        try:
            return CellProgram(ProgramKind(obj))
        except ValueError:
            errors.append(f"{where}: unknown program {obj!r}")
            return CellProgram(ProgramKind.INERT)
    if isinstance(obj, dict):
        _expect_keys(obj, {"program", "params"}, {"program"}, where, errors)
        kind_name = obj.get("program", "inert")
        try:
            kind = ProgramKind(kind_name)
        except ValueError:
            errors.append(f"{where}: unknown program {kind_name!r}")
            kind = ProgramKind.INERT
        params = obj.get("params", {})
        if not isinstance(params, dict):
            errors.append(f"{where}: params must be an object")
            params = {}
        return CellProgram(kind, dict(params))
    errors.append(f"{where}: expected program name or object, got {obj!r}")
    return CellProgram(ProgramKind.INERT)


def _parse_magnet(obj, pitch: float, where: str, errors: list[str]) -> Optional[MagnetScript]:
    if obj is None:
        return None
    if obj == "interactive":
        return MagnetScript(interactive=True)
    if not isinstance(obj, dict):
        errors.append(f"{where}: expected null, \"interactive\" or an object")
        return None
    _expect_keys(obj, {"script", "spec"}, {"script"}, where, errors)
    spec = MagnetSpec()
    if "spec" in obj:
        sobj = obj["spec"]
        _expect_keys(sobj, {"diameter", "strength", "detect_radius"}, set(),
                     f"{where}.spec", errors)
        try:
            spec = MagnetSpec(**sobj)
        except (TypeError, ValueError) as exc:
            errors.append(f"{where}.spec: {exc}")
    events = []
    for i, entry in enumerate(obj.get("script", [])):
        ewhere = f"{where}.script[{i}]"
        if not isinstance(entry, dict):
            errors.append(f"{ewhere}: expected an object")
            continue
        _expect_keys(entry, {"tick", "x", "y", "cell", "remove"}, {"tick"}, ewhere, errors)
        tick = entry.get("tick", 0)
        if not isinstance(tick, int) or tick < 0:
            errors.append(f"{ewhere}: tick must be a non-negative integer")
            tick = 0
        if entry.get("remove"):
            events.append(MagnetEvent(tick=tick, remove=True))
        elif "cell" in entry:
            cid = _parse_cell_id(entry["cell"], ewhere, errors)
            if cid is not None:
                events.append(MagnetEvent(tick=tick, x=(cid.col + 0.5) * pitch,
                                          y=(cid.row + 0.5) * pitch))
        elif "x" in entry and "y" in entry:
            events.append(MagnetEvent(tick=tick, x=float(entry["x"]), y=float(entry["y"])))
        else:
            errors.append(f"{ewhere}: need \"cell\" or \"x\"/\"y\" or \"remove\"")
    events.sort(key=lambda e: e.tick)
    return MagnetScript(events=events, spec=spec)


_TOP_KEYS = {"schema", "name", "figure", "world", "noise", "cells", "robots",
             "start_variants", "magnet", "duration_ticks", "trials", "seed", "success"}
_TOP_REQUIRED = {"schema", "name", "world", "duration_ticks", "trials", "seed", "success"}

_SUCCESS_KINDS = {"none", "first_hop_to", "reach_cell", "avoid_walls",
                  "transport_complete", "grid_dark_by", "readings_match",
                  "robots_min_col"}


def load_scenario(text: str) -> ScenarioSpec:
    """Parse and fully validate a scenario document; semantic errors are
    reported collectively."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")

    errors: list[str] = []
    _expect_keys(doc, _TOP_KEYS, _TOP_REQUIRED, "top level", errors)
    if doc.get("schema") != SCHEMA_VERSION:
        errors.append(f"schema: expected version {SCHEMA_VERSION}, got {doc.get('schema')!r}")

    world_obj = doc.get("world", {})
    _expect_keys(world_obj, {"rows", "cols", "cell_pitch_mm", "tick_dt_ms"},
                 {"rows", "cols"}, "world", errors)
    rows = world_obj.get("rows", 0)
    cols = world_obj.get("cols", 0)
    if not isinstance(rows, int) or rows < 1:
        errors.append(f"world.rows: must be a positive integer, got {rows!r}")
        rows = 1
    if not isinstance(cols, int) or cols < 1:
        errors.append(f"world.cols: must be a positive integer, got {cols!r}")
        cols = 1
    pitch = float(world_obj.get("cell_pitch_mm", 75.0))
    tick_dt = float(world_obj.get("tick_dt_ms", 10.0))

    noise = doc.get("noise", "none")
    if isinstance(noise, dict):
        _expect_keys(noise, {"sigma_rot", "sigma_drive", "duty_mismatch"}, set(),
                     "noise", errors)
        try:
            noise = NoiseModel(**noise)
        except (TypeError, ValueError) as exc:
            errors.append(f"noise: {exc}")
            noise = NoiseModel.none()
    elif noise not in ("none", "calibrated"):
        errors.append(f"noise: expected \"none\", \"calibrated\" or an object, got {noise!r}")
        noise = "none"

    def in_grid(cid: CellId) -> bool:
        return 0 <= cid.row < rows and 0 <= cid.col < cols

    default_program = CellProgram(ProgramKind.INERT)
    cells: list[CellEntry] = []
    cells_obj = doc.get("cells", {})
    if cells_obj:
        _expect_keys(cells_obj, {"default", "set"}, set(), "cells", errors)
        if "default" in cells_obj:
            default_program = _parse_program(cells_obj["default"], "cells.default", errors)
        for i, entry in enumerate(cells_obj.get("set", [])):
            where = f"cells.set[{i}]"
            if not isinstance(entry, dict):
                errors.append(f"{where}: expected an object")
                continue
            _expect_keys(entry, {"at", "intensity", "program", "params"}, {"at"}, where, errors)
            cid = _parse_cell_id(entry.get("at"), where, errors)
            if cid is None:
                continue
            if not in_grid(cid):
                errors.append(f"{where}: cell {tuple(cid)} outside {rows}x{cols} grid")
                continue
            if "intensity" in entry:
                level = entry["intensity"]
                if not isinstance(level, int) or not 0 <= level <= 100:
                    errors.append(f"{where}: intensity must be an integer 0..100")
                    level = 0
                cells.append(CellEntry(cid, CellProgram(ProgramKind.STATIC_INTENSITY,
                                                        {"intensity": level})))
            else:
                prog_obj = {k: entry[k] for k in ("program", "params") if k in entry}
                cells.append(CellEntry(cid, _parse_program(prog_obj, where, errors)))

    robots: list[RobotSpec] = []
    for i, entry in enumerate(doc.get("robots", [])):
        where = f"robots[{i}]"
        if not isinstance(entry, dict):
            errors.append(f"{where}: expected an object")
            continue
        _expect_keys(entry, {"id", "row", "col", "heading", "behavior", "params"},
                     {"id", "row", "col", "heading", "behavior"}, where, errors)
        cid = CellId(entry.get("row", 0), entry.get("col", 0))
        if not in_grid(cid):
            errors.append(f"{where}: start cell {tuple(cid)} outside {rows}x{cols} grid")
        heading = _parse_side(entry.get("heading", "E"), where, errors)
        behavior_name = entry.get("behavior", "idle")
        try:
            behavior = BehaviorKind(behavior_name)
        except ValueError:
            errors.append(f"{where}: unknown behavior {behavior_name!r}")
            behavior = BehaviorKind.IDLE
        params = entry.get("params", {})
        if not isinstance(params, dict):
            errors.append(f"{where}: params must be an object")
            params = {}
        robots.append(RobotSpec(str(entry.get("id", f"r{i}")), cid.row, cid.col,
                                heading, behavior, dict(params)))

    start_variants: list[StartVariant] = []
    for i, entry in enumerate(doc.get("start_variants", [])):
        where = f"start_variants[{i}]"
        if not isinstance(entry, dict):
            errors.append(f"{where}: expected an object")
            continue
        _expect_keys(entry, {"row", "col", "heading", "target"},
                     {"row", "col", "heading"}, where, errors)
        cid = CellId(entry.get("row", 0), entry.get("col", 0))
        if not in_grid(cid):
            errors.append(f"{where}: start cell {tuple(cid)} outside {rows}x{cols} grid")
        heading = _parse_side(entry.get("heading", "E"), where, errors)
        target = None
        if "target" in entry:
            target = _parse_cell_id(entry["target"], where, errors)
            if target is not None and not in_grid(target):
                errors.append(f"{where}: target {tuple(target)} outside {rows}x{cols} grid")
        start_variants.append(StartVariant(cid.row, cid.col, heading, target))
    if start_variants and not robots:
        errors.append("start_variants: no robots to apply the variants to")

    magnet = _parse_magnet(doc.get("magnet"), pitch, "magnet", errors)

    duration = doc.get("duration_ticks", 0)
    if not isinstance(duration, int) or duration < 1:
        errors.append(f"duration_ticks: must be a positive integer, got {duration!r}")
        duration = 1
    trials = doc.get("trials", 1)
    if not isinstance(trials, int) or trials < 1:
        errors.append(f"trials: must be >= 1, got {trials!r}")
        trials = 1
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        errors.append(f"seed: must be an integer, got {seed!r}")
        seed = 0

    success_obj = doc.get("success", {"kind": "none"})
    success = SuccessSpec("none")
    if isinstance(success_obj, dict):
        kind = success_obj.get("kind")
        if kind not in _SUCCESS_KINDS:
            errors.append(f"success.kind: unknown predicate {kind!r}")
        else:
            success = SuccessSpec(kind, {k: v for k, v in success_obj.items() if k != "kind"})
    else:
        errors.append("success: expected an object with a \"kind\" field")

    if errors:
        raise ScenarioError("invalid scenario:\n  " + "\n  ".join(errors))

    return ScenarioSpec(
        name=str(doc["name"]),
        figure=str(doc.get("figure", "")),
        rows=rows, cols=cols, cell_pitch=pitch, tick_dt=tick_dt,
        noise=noise, default_program=default_program, cells=cells,
        robots=robots, start_variants=start_variants, magnet=magnet,
        duration_ticks=duration, trials=trials, seed=seed, success=success,
    )


# --- scenario lookup ------------------------------------------------------------


def builtin_scenarios() -> list[ScenarioSpec]:
    """The seven bundled experiment definitions, one per reproduced figure."""
    return [load_builtin(name) for name in BUILTIN_NAMES]


def load_builtin(name: str) -> ScenarioSpec:
    ref = resources.files("gengrid").joinpath("bundled", f"{name}.scn")
    if not ref.is_file():
        raise ScenarioError(f"no builtin scenario named {name!r}")
    return load_scenario(ref.read_text())


def find_scenario(name_or_path: str) -> ScenarioSpec:
    """Resolve a scenario by file path, by GENGRID_SCENARIO_PATH lookup, or by
    builtin name, in that order."""
    candidate = Path(name_or_path)
    if candidate.is_file():
        return load_scenario(candidate.read_text())
    for directory in os.environ.get(SCENARIO_PATH_ENV, "").split(os.pathsep):
        if not directory:
            continue
        for stem in (name_or_path, f"{name_or_path}.scn"):
            p = Path(directory) / stem
            if p.is_file():
                return load_scenario(p.read_text())
    if name_or_path in BUILTIN_NAMES:
        return load_builtin(name_or_path)
    raise ScenarioError(f"unknown scenario {name_or_path!r}")


# --- trial runner ------------------------------------------------------------


@dataclass
class HopEvent:
    robot: int
    tick: int
    src: CellId
    dst: CellId


@dataclass
class TrialRecord:
    """Everything one trial produced; self-contained for aggregation."""

    trial_index: int
    variant_index: int
    seed: int
    rows: int
    cols: int
    start_cell: CellId
    occupancy: list[np.ndarray]               # per robot: cell index per tick
    hops: list[HopEvent]
    light_history: list[tuple[int, int, int, int]]  # (tick, row, col, center)
    final_cells: list[CellId]
    success: bool
    wall_ticks: int


def derive_seed(base: int, variant_index: int, trial_index: int) -> int:
    digest = hashlib.sha256(
        f"gengrid:{base}:{variant_index}:{trial_index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


# Behaviors that provably stay idle once they decide to (static grid, static
# frame); lets the runner fast-forward a finished trial.
_PARKABLE = {BehaviorKind.GRADIENT_HOP, BehaviorKind.TRANSPORT_FOLLOWER,
             BehaviorKind.FLEE_LIGHT, BehaviorKind.IDLE}


def run_trial(spec: ScenarioSpec, trial_index: int, variant_index: int = 0) -> TrialRecord:
    seed = derive_seed(spec.seed, variant_index, trial_index)
    rng = np.random.default_rng(seed)
    world = spec.build_world(variant_index)
    grid = world.grid
    pitch = world.config.cell_pitch
    kin = world.config.kin
    duration = spec.duration_ticks

    wall_cells = {cell.id for cell in grid.all_cells()
                  if cell.program.kind is ProgramKind.VIRTUAL_WALL}
    needs_hall = grid.reads_hall
    events = list(spec.magnet.events) if spec.magnet and not spec.magnet.interactive else []
    event_idx = 0
    magnet_spec = spec.magnet.spec if spec.magnet else MagnetSpec()

    robots = world.robots
    n_robots = len(robots)
    occupancy: list[list[int]] = [[] for _ in range(n_robots)]
    prev_cells: list[Optional[CellId]] = [None] * n_robots
    hops: list[HopEvent] = []
    light_history: list[tuple[int, int, int, int]] = []
    prev_centers: Optional[list[list[int]]] = None
    wall_ticks = 0
    parkable = all(r.behavior_kind in _PARKABLE for r in robots)

    cols = spec.cols
    tick = 0
    while tick < duration:
        while event_idx < len(events) and events[event_idx].tick == tick:
            ev = events[event_idx]
            if ev.remove:
                world.remove_free_magnet()
            else:
                world.place_free_magnet(ev.x, ev.y, magnet_spec)
            event_idx += 1
        if needs_hall:
            world.refresh_hall()
        settled_before = grid.settled
        grid.step_cells()
        if not settled_before:
            centers = [[cell.leds.pwm[CENTER] for cell in row] for row in grid.cells]
            if prev_centers is None:
                for r, row in enumerate(centers):
                    for c, v in enumerate(row):
                        if v:
                            light_history.append((tick, r, c, v))
            else:
                for r, row in enumerate(centers):
                    prow = prev_centers[r]
                    for c, v in enumerate(row):
                        if v != prow[c]:
                            light_history.append((tick, r, c, v))
            prev_centers = centers

        all_parked = parkable and event_idx >= len(events) and grid.settled
        for robot in robots:
            if robot.motion is None and not robot.plan:
                frame = world.robot_readings(robot)
                commands, robot.behavior_state = decide(
                    robot.behavior_kind, frame, robot.pose.theta,
                    robot.behavior_state, rng, robot.behavior_params,
                    pitch=pitch, kin=kin)
                if commands:
                    robot.plan.extend(commands)
                    all_parked = False
            else:
                all_parked = False

        world.advance(rng)

        for i, robot in enumerate(robots):
            cid = world.occupancy_cell(robot)
            occupancy[i].append(cid.row * cols + cid.col)
            prev = prev_cells[i]
            if prev is not None and prev != cid:
                hops.append(HopEvent(i, tick, prev, cid))
            prev_cells[i] = cid
            if cid in wall_cells:
                wall_ticks += 1
        tick += 1

        if all_parked and tick < duration:
            # Nothing can change anymore: freeze the remaining timeline.
            remaining = duration - tick
            for i, robot in enumerate(robots):
                occupancy[i].extend([occupancy[i][-1]] * remaining)
                if prev_cells[i] in wall_cells:
                    wall_ticks += remaining
            tick = duration

    final_cells = [world.occupancy_cell(robot) for robot in robots]
    variant = spec.variants()[variant_index]
    record = TrialRecord(
        trial_index=trial_index,
        variant_index=variant_index,
        seed=seed,
        rows=spec.rows,
        cols=spec.cols,
        start_cell=CellId(variant.row, variant.col),
        occupancy=[np.asarray(track, dtype=np.int32) for track in occupancy],
        hops=hops,
        light_history=light_history,
        final_cells=final_cells,
        success=False,
        wall_ticks=wall_ticks,
    )
    record.success = _evaluate_success(spec, variant, record, world)
    return record


# --- success predicates ------------------------------------------------------


def _final_lit_centers(record: TrialRecord) -> dict[CellId, int]:
    state: dict[CellId, int] = {}
    for tick, r, c, v in record.light_history:
        state[CellId(r, c)] = v
    return {cid: v for cid, v in state.items() if v > 0}


def _evaluate_success(spec: ScenarioSpec, variant: StartVariant,
                      record: TrialRecord, world: World) -> bool:
    kind = spec.success.kind
    params = spec.success.params
    if kind == "none":
        return True
    if kind == "first_hop_to":
        target = variant.target
        if target is None and "target" in params:
            target = CellId(*params["target"])
        first = next((h for h in record.hops if h.robot == 0), None)
        return first is not None and first.dst == target
    if kind == "reach_cell":
        target = variant.target if variant.target is not None else CellId(*params["target"])
        return record.final_cells[0] == target
    if kind == "avoid_walls":
        return record.wall_ticks == 0
    if kind == "transport_complete":
        row = params["row"]
        object_end = CellId(row, params["object_start_col"] + params["steps"])
        lit = _final_lit_centers(record)
        flanks = {CellId(row, object_end.col - 1), CellId(row, object_end.col + 1)}
        return (set(lit) == {object_end}
                and set(record.final_cells) == flanks)
    if kind == "grid_dark_by":
        deadline = params["tick"]
        brightness: dict[CellId, int] = {}
        last_lit_tick = -1
        history = sorted(record.light_history, key=lambda e: e[0])
        idx = 0
        for tick in range(spec.duration_ticks):
            while idx < len(history) and history[idx][0] == tick:
                _, r, c, v = history[idx]
                brightness[CellId(r, c)] = v
                idx += 1
            if any(v > 0 for v in brightness.values()):
                last_lit_tick = tick
        return 0 <= last_lit_tick <= deadline
    if kind == "readings_match":
        expected = params["expected"]
        robot = world.robots[0]
        frame = world.robot_readings(robot)
        world_readings = _frame_to_world_sides(frame, robot.pose.theta)
        return all(world_readings[key] == expected[key]
                   for key in ("center", "N", "E", "S", "W"))
    if kind == "robots_min_col":
        return all(cid.col >= params["min_col"] for cid in record.final_cells)
    raise ScenarioError(f"unknown success predicate {kind!r}")


def _frame_to_world_sides(frame, theta: float) -> dict[str, int]:
    """Map body readings to world sides for a robot at a cardinal heading."""
    heading = nearest_side(theta)
    order = [Side.N, Side.E, Side.S, Side.W]
    # body front/right/back/left point at heading, heading+90deg, ...
    out = {"center": frame.center}
    for i, name in enumerate(("front", "right", "back", "left")):
        out[order[(order.index(heading) + i) % 4].name] = frame[name]
    return out


# --- experiment runner ------------------------------------------------------


@dataclass
class ExperimentReport:
    scenario: str
    figure: str
    seed: int
    trials_per_variant: int
    variant_count: int
    duration_ticks: int
    noise: NoiseModel
    records: list[TrialRecord]
    success_rate: float
    per_variant_success: list[float]
    probability_map: "telemetry.ProbabilityMap"
    heatmap: "telemetry.Heatmap"
    safe_time_fraction: Optional[float] = None


def run_experiment(spec: ScenarioSpec, trials: Optional[int] = None,
                   noiseless: bool = False) -> ExperimentReport:
    """Run every start variant for the given number of independent trials and
    aggregate. Deterministic given the scenario seed."""
    if noiseless:
        spec = spec.with_overrides(noise=NoiseModel.none())
    n_trials = trials if trials is not None else spec.trials
    variants = spec.variants()
    records: list[TrialRecord] = []
    for vi in range(len(variants)):
        for t in range(n_trials):
            records.append(run_trial(spec, t, vi))
    successes = sum(1 for r in records if r.success)
    per_variant = []
    for vi in range(len(variants)):
        sub = [r for r in records if r.variant_index == vi]
        per_variant.append(sum(1 for r in sub if r.success) / len(sub))
    safe_fraction = None
    if spec.success.kind == "avoid_walls":
        total_ticks = sum(len(track) for r in records for track in r.occupancy)
        total_wall = sum(r.wall_ticks for r in records)
        safe_fraction = 1.0 - total_wall / total_ticks if total_ticks else None
    return ExperimentReport(
        scenario=spec.name,
        figure=spec.figure,
        seed=spec.seed,
        trials_per_variant=n_trials,
        variant_count=len(variants),
        duration_ticks=spec.duration_ticks,
        noise=spec.resolved_noise(),
        records=records,
        success_rate=successes / len(records),
        per_variant_success=per_variant,
        probability_map=telemetry.hop_probability_map(records),
        heatmap=telemetry.occupancy_heatmap(records),
        safe_time_fraction=safe_fraction,
    )


# --- noise calibration ------------------------------------------------------


@dataclass
class CalibrationResult:
    model: NoiseModel
    achieved: dict[str, float]
    error: float
    residual: bool
    evaluations: list[dict]


DEFAULT_TARGETS = {"single_hop": 0.90, "path": 0.76}
DEFAULT_TOLERANCES = {"single_hop": 0.05, "path": 0.07}


def calibrate_noise(targets: Optional[dict[str, float]] = None, budget: int = 24,
                    trials: int = 500, seed: int = 20260810,
                    sigma_rot_bounds: tuple[float, float] = (0.0, 1.2),
                    sigma_drive_values: tuple[float, ...] = (0.0, 0.003),
                    tolerances: Optional[dict[str, float]] = None) -> CalibrationResult:
    """Fit (sigma_rot, sigma_drive) to the target hop success rates.

    Coarse grid pass followed by a refinement around the best point, within
    `budget` evaluations of `trials` trials per scenario each. Deterministic
    given `seed`. If no point lands inside the tolerance bands the best model
    found is returned with the residual flag set.
    """
    targets = dict(DEFAULT_TARGETS if targets is None else targets)
    tolerances = dict(DEFAULT_TOLERANCES if tolerances is None else tolerances)
    for name, value in targets.items():
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"target {name}={value} outside [0, 1]")
    if budget < 1:
        raise ValueError("budget must be >= 1")

    single = load_builtin("single_hop").with_overrides(seed=seed, trials=trials)
    single.start_variants = single.start_variants[:1]
    path = load_builtin("path2d").with_overrides(seed=seed + 1, trials=trials)

    evaluations: list[dict] = []

    def measure(model: NoiseModel) -> dict[str, float]:
        s_rate = run_experiment(single.with_overrides(noise=model), trials=trials).success_rate
        p_rate = run_experiment(path.with_overrides(noise=model), trials=trials).success_rate
        return {"single_hop": s_rate, "path": p_rate}

    def score(achieved: dict[str, float]) -> float:
        return sum((achieved[k] - targets[k]) ** 2 for k in targets)

    lo, hi = sigma_rot_bounds
    best: Optional[tuple[float, NoiseModel, dict[str, float]]] = None
    spent = 0

    def try_point(sr: float, sd: float) -> None:
        nonlocal best, spent
        sr = min(max(sr, lo), hi)
        if any(abs(e["sigma_rot"] - sr) < 1e-12 and abs(e["sigma_drive"] - sd) < 1e-12
               for e in evaluations):
            return
        model = NoiseModel(sigma_rot=sr, sigma_drive=sd)
        achieved = measure(model)
        err = score(achieved)
        evaluations.append({"sigma_rot": sr, "sigma_drive": sd,
                            **achieved, "error": err})
        spent += 1
        if best is None or err < best[0]:
            best = (err, model, achieved)

    try_point(0.0, 0.0)
    coarse = [lo + (hi - lo) * i / 6 for i in range(1, 7)]
    for sd in sigma_drive_values:
        for sr in coarse:
            if spent >= budget:
                break
            try_point(sr, sd)
        if spent >= budget:
            break
    # refine around the best point with shrinking steps
    step = (hi - lo) / 6
    while spent < budget and step > 1e-3:
        _, model, _ = best
        for sr in (model.sigma_rot - step / 2, model.sigma_rot + step / 2):
            if spent >= budget:
                break
            try_point(sr, model.sigma_drive)
        step /= 2

    err, model, achieved = best
    residual = any(abs(achieved[k] - targets[k]) > tolerances.get(k, 0.05) for k in targets)
    return CalibrationResult(model=model, achieved=achieved, error=err,
                             residual=residual, evaluations=evaluations)
