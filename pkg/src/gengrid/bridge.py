"""Live session server.

One asyncio task owns the world and ticks it in real time (scaled by the
speed multiplier); websocket clients receive decimated state frames and send
steering commands. Commands apply at tick boundaries only, keeping the
synchronous cell semantics intact, and every applied command is recorded as
(tick, command) so a session can be replayed headlessly into the identical
frame stream.

Wire schema (versioned): server->client {type:"frame", ...} | {type:"ack",
id, tick, [warning]} | {type:"err", id, message}; client->server
{type:"cmd", id, kind, args}.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .behaviors import decide
from .grid import CENTER
from .scenarios import ScenarioSpec, find_scenario
from .world import World

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
DEFAULT_FRAME_EVERY = 5
SPEED_MIN, SPEED_MAX = 0.1, 20.0

COMMAND_KINDS = (
    "place_magnet",
    "move_magnet",
    "remove_magnet",
    "pause",
    "resume",
    "set_speed",
    "reset",
    "load_scenario",
)


class CommandError(Exception):
    pass


@dataclass
class LogEntry:
    tick: int
    kind: str
    args: dict = field(default_factory=dict)


class Session:
    """Headless scenario session: the tick engine the server (and replay)
    drive. Interactive sessions ignore any scripted magnet."""

    def __init__(self, spec: ScenarioSpec, interactive: bool = True):
        self.spec = spec
        self.interactive = interactive
        self.seq = 0
        self.speed = 1.0
        self.paused = False
        self.command_log: list[LogEntry] = []
        self._reset_world()

    def _reset_world(self) -> None:
        self.world: World = self.spec.build_world(0)
        self.rng = np.random.default_rng(self.spec.seed)
        self.needs_hall = self.world.grid.reads_hall
        self.tick = 0
        self._script = []
        if self.spec.magnet and not self.spec.magnet.interactive and not self.interactive:
            self._script = list(self.spec.magnet.events)
        self._script_idx = 0

    # -- engine ---------------------------------------------------------------

    def tick_once(self) -> None:
        world = self.world
        while (self._script_idx < len(self._script)
               and self._script[self._script_idx].tick == self.tick):
            ev = self._script[self._script_idx]
            if ev.remove:
                world.remove_free_magnet()
            else:
                world.place_free_magnet(ev.x, ev.y)
            self._script_idx += 1
        if self.needs_hall:
            world.refresh_hall()
        world.grid.step_cells()
        pitch = world.config.cell_pitch
        kin = world.config.kin
        for robot in world.robots:
            if robot.motion is None and not robot.plan:
                frame = world.robot_readings(robot)
                commands, robot.behavior_state = decide(
                    robot.behavior_kind, frame, robot.pose.theta,
                    robot.behavior_state, self.rng, robot.behavior_params,
                    pitch=pitch, kin=kin)
                robot.plan.extend(commands)
        world.advance(self.rng)
        self.tick = world.tick

    # -- commands ---------------------------------------------------------------

    def apply_command(self, kind: str, args: dict) -> dict:
        """Apply one steering command at the current tick boundary. Returns
        the ack payload fields; raises CommandError for rejected commands."""
        ack: dict = {"tick": self.tick}
        if kind == "place_magnet":
            x, y = self._coords(args)
            self.world.place_free_magnet(x, y)
        elif kind == "move_magnet":
            x, y = self._coords(args)
            if not self.world.move_free_magnet(x, y):
                raise CommandError("no magnet placed")
        elif kind == "remove_magnet":
            if not self.world.remove_free_magnet():
                ack["warning"] = "no magnet placed"
        elif kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "set_speed":
            try:
                requested = float(args["multiplier"])
            except (KeyError, TypeError, ValueError):
                raise CommandError("set_speed needs a numeric multiplier")
            clamped = min(max(requested, SPEED_MIN), SPEED_MAX)
            if clamped != requested:
                ack["warning"] = f"speed clamped to {clamped}"
            self.speed = clamped
            ack["speed"] = clamped
        elif kind == "reset":
            self._reset_world()
        elif kind == "load_scenario":
            try:
                name = args["name"]
                spec = find_scenario(str(name))
            except Exception as exc:
                raise CommandError(f"cannot load scenario: {exc}")
            self.spec = spec
            self._reset_world()
        else:
            raise CommandError(f"unknown command kind {kind!r}")
        self.command_log.append(LogEntry(self.tick, kind, dict(args)))
        return ack

    @staticmethod
    def _coords(args: dict) -> tuple[float, float]:
        try:
            return float(args["x"]), float(args["y"])
        except (KeyError, TypeError, ValueError):
            raise CommandError("command needs numeric x and y in mm")

    # -- frames ---------------------------------------------------------------

    def frame(self) -> dict:
        world = self.world
        grid = world.grid
        self.seq += 1
        cells = [[cell.leds.pwm[CENTER] for cell in row] for row in grid.cells]
        lit = [[1 if cell.leds.analog_level() > 0 or any(cell.leds.side) else 0
                for cell in row] for row in grid.cells]
        robots = [
            {
                "id": r.id,
                "x": r.pose.x,
                "y": r.pose.y,
                "theta": r.pose.theta,
                "behavior": r.behavior_kind.value if r.behavior_kind else "idle",
            }
            for r in world.robots
        ]
        magnet = None
        if world.free_magnet is not None:
            magnet = {"x": world.free_magnet.x, "y": world.free_magnet.y}
        return {
            "type": "frame",
            "v": PROTOCOL_VERSION,
            "seq": self.seq,
            "tick": self.tick,
            "scenario": self.spec.name,
            "rows": grid.rows,
            "cols": grid.cols,
            "cell_pitch": world.config.cell_pitch,
            "cells": cells,
            "lit": lit,
            "robots": robots,
            "magnet": magnet,
            "paused": self.paused,
            "speed": self.speed,
        }

    def save_log(self, path) -> None:
        lines = [json.dumps({"tick": e.tick, "kind": e.kind, "args": e.args},
                            sort_keys=True) for e in self.command_log]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def frame_content_hash(frames: list[dict]) -> str:
    """Digest of a frame stream's simulated content (seq and pacing fields
    excluded, so a replay hashes identically to the live run)."""
    h = hashlib.sha256()
    for f in frames:
        stripped = {k: f[k] for k in
                    ("tick", "scenario", "rows", "cols", "cells", "robots", "magnet")}
        h.update(json.dumps(stripped, sort_keys=True).encode())
    return h.digest()[:8].hex()


def load_command_log(path) -> list[LogEntry]:
    entries = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            obj = json.loads(line)
            entries.append(LogEntry(obj["tick"], obj["kind"], obj.get("args", {})))
    return entries


def replay(spec: ScenarioSpec, entries: list[LogEntry], total_ticks: int,
           frame_every: int = DEFAULT_FRAME_EVERY, interactive: bool = True) -> list[dict]:
    """Re-run a session headlessly, applying the logged commands at their
    recorded ticks; returns the decimated frame stream."""
    session = Session(spec, interactive=interactive)
    frames: list[dict] = []
    idx = 0
    while session.tick < total_ticks:
        while idx < len(entries) and entries[idx].tick == session.tick:
            entry = entries[idx]
            if entry.kind not in ("pause", "resume", "set_speed"):
                session.apply_command(entry.kind, entry.args)
            idx += 1
        session.tick_once()
        if session.tick % frame_every == 0:
            frames.append(session.frame())
    return frames


# --- websocket server ------------------------------------------------------------


class BridgeServer:
    def __init__(self, spec: ScenarioSpec, frame_every: int = DEFAULT_FRAME_EVERY,
                 log_path: Optional[str] = None, interactive: bool = True):
        self.session = Session(spec, interactive=interactive)
        self.frame_every = frame_every
        self.log_path = log_path
        self.clients: set = set()
        self.queues: dict = {}
        self.commands: asyncio.Queue = asyncio.Queue()
        self.boundary_frames: list[dict] = []
        self._stopping = asyncio.Event()

    # -- broadcast ---------------------------------------------------------------

    def _broadcast(self, payload: dict) -> None:
        for queue in self.queues.values():
            if queue.full():
                try:
                    queue.get_nowait()  # drop the oldest frame, never block
                except asyncio.QueueEmpty:
                    pass
            queue.put_nowait(payload)

    def _emit_frame(self, boundary: bool) -> None:
        payload = self.session.frame()
        if boundary:
            self.boundary_frames.append(payload)
        self._broadcast(payload)

    # -- simulation loop ------------------------------------------------------------

    async def run_loop(self) -> None:
        session = self.session
        tick_s = session.world.config.tick_dt / 1000.0
        while not self._stopping.is_set():
            mutated = await self._drain_commands()
            if session.paused:
                if mutated:
                    self._emit_frame(boundary=False)
                await asyncio.sleep(0.02)
                continue
            session.tick_once()
            if session.tick % self.frame_every == 0:
                self._emit_frame(boundary=True)
            await asyncio.sleep(tick_s / session.speed)

    async def _drain_commands(self) -> bool:
        mutated = False
        while True:
            try:
                websocket, message = self.commands.get_nowait()
            except asyncio.QueueEmpty:
                return mutated
            reply = self._handle_command(message)
            mutated = mutated or reply.get("type") == "ack"
            try:
                await websocket.send(json.dumps(reply, sort_keys=True))
            except Exception:
                pass  # client went away; session continues

    def _handle_command(self, message: str) -> dict:
        request_id = None
        try:
            obj = json.loads(message)
            if not isinstance(obj, dict):
                raise CommandError("message must be an object")
            request_id = obj.get("id")
            if obj.get("type") != "cmd":
                raise CommandError(f"unexpected message type {obj.get('type')!r}")
            kind = obj.get("kind")
            args = obj.get("args", {})
            if not isinstance(args, dict):
                raise CommandError("args must be an object")
            ack = self.session.apply_command(kind, args)
            return {"type": "ack", "id": request_id, **ack}
        except CommandError as exc:
            return {"type": "err", "id": request_id, "message": str(exc)}
        except json.JSONDecodeError as exc:
            return {"type": "err", "id": request_id, "message": f"bad json: {exc.msg}"}

    # -- client handling ------------------------------------------------------------

    async def handler(self, websocket) -> None:
        queue: asyncio.Queue = asyncio.Queue(maxsize=64)
        self.clients.add(websocket)
        self.queues[websocket] = queue
        try:
            await websocket.send(json.dumps(self.session.frame(), sort_keys=True))
            sender = asyncio.create_task(self._send_frames(websocket, queue))
            try:
                async for message in websocket:
                    await self.commands.put((websocket, message))
            finally:
                sender.cancel()
        except Exception:
            pass  # disconnects never take the session down
        finally:
            self.clients.discard(websocket)
            self.queues.pop(websocket, None)

    @staticmethod
    async def _send_frames(websocket, queue: asyncio.Queue) -> None:
        while True:
            payload = await queue.get()
            await websocket.send(json.dumps(payload, sort_keys=True))

    def stop(self) -> None:
        self._stopping.set()
        if self.log_path:
            self.session.save_log(self.log_path)


async def serve(spec: ScenarioSpec, host: str = "127.0.0.1", port: int = 8089,
                frame_every: int = DEFAULT_FRAME_EVERY,
                log_path: Optional[str] = None):
    """Start the bridge; returns (websockets server, BridgeServer, loop task)."""
    import websockets

    bridge = BridgeServer(spec, frame_every=frame_every, log_path=log_path)
    server = await websockets.serve(bridge.handler, host, port)
    loop_task = asyncio.create_task(bridge.run_loop())
    return server, bridge, loop_task


def serve_forever(spec: ScenarioSpec, host: str, port: int,
                  frame_every: int = DEFAULT_FRAME_EVERY,
                  log_path: Optional[str] = None) -> None:
    async def _main():
        server, bridge, loop_task = await serve(
            spec, host, port, frame_every=frame_every, log_path=log_path)
        log.info("serving %s on %s:%d", spec.name, host, port)
        print(f"serving scenario {spec.name!r} on ws://{host}:{port}", flush=True)
        try:
            await loop_task
        finally:
            bridge.stop()
            server.close()
            await server.wait_closed()

    try:
        asyncio.run(_main())
    except KeyboardInterrupt:
        pass
