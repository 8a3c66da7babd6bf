"""Live session server: protocol contract, steering, and replay determinism."""

import asyncio
import json

import websockets

from gengrid.bridge import (
    BridgeServer,
    LogEntry,
    Session,
    frame_content_hash,
    load_command_log,
    replay,
    serve,
)
from gengrid.scenarios import load_builtin


async def start_bridge(scenario="shepherding", frame_every=5):
    spec = load_builtin(scenario)
    server, bridge, loop_task = await serve(spec, "127.0.0.1", 0,
                                            frame_every=frame_every)
    port = server.sockets[0].getsockname()[1]
    return server, bridge, loop_task, f"ws://127.0.0.1:{port}"


async def stop_bridge(server, bridge, loop_task):
    bridge.stop()
    loop_task.cancel()
    server.close()
    await server.wait_closed()


async def send_cmd(ws, request_id, kind, **args):
    await ws.send(json.dumps({"type": "cmd", "id": request_id, "kind": kind,
                              "args": args}))


async def next_of_type(ws, wanted, timeout=5.0):
    while True:
        message = json.loads(await asyncio.wait_for(ws.recv(), timeout))
        if message["type"] in wanted:
            return message


def run(coro):
    return asyncio.run(coro)


# --- protocol contract ------------------------------------------------------------


def test_first_message_is_a_full_frame():
    async def scenario():
        server, bridge, task, url = await start_bridge()
        try:
            async with websockets.connect(url) as ws:
                first = json.loads(await asyncio.wait_for(ws.recv(), 5))
                assert first["type"] == "frame"
                assert first["v"] == 1
                assert first["rows"] == 5 and first["cols"] == 5
                assert len(first["cells"]) == 5
                assert {r["id"] for r in first["robots"]} == {"r0", "r1"}
                assert first["tick"] >= 0
        finally:
            await stop_bridge(server, bridge, task)

    run(scenario())


def test_two_clients_see_identical_frames():
    async def scenario():
        server, bridge, task, url = await start_bridge()
        try:
            async with websockets.connect(url) as a, websockets.connect(url) as b:
                # skip each client's personal snapshot, then compare streamed frames
                await a.recv()
                await b.recv()
                frames_a = [await next_of_type(a, {"frame"}) for _ in range(4)]
                frames_b = [await next_of_type(b, {"frame"}) for _ in range(4)]
                ticks_a = [f["tick"] for f in frames_a]
                ticks_b = [f["tick"] for f in frames_b]
                shared = set(ticks_a) & set(ticks_b)
                assert shared
                by_tick_a = {f["tick"]: f["cells"] for f in frames_a}
                by_tick_b = {f["tick"]: f["cells"] for f in frames_b}
                for tick in shared:
                    assert by_tick_a[tick] == by_tick_b[tick]
        finally:
            await stop_bridge(server, bridge, task)

    run(scenario())


def test_malformed_command_gets_error_reply_and_session_survives():
    async def scenario():
        server, bridge, task, url = await start_bridge()
        try:
            async with websockets.connect(url) as ws:
                await ws.recv()
                await send_cmd(ws, "req-1", "teleport_robot", x=1, y=2)
                reply = await next_of_type(ws, {"err", "ack"})
                assert reply["type"] == "err"
                assert reply["id"] == "req-1"
                await ws.send("this is not json")
                reply = await next_of_type(ws, {"err"})
                assert reply["type"] == "err"
                # session still ticking: frames keep arriving
                frame = await next_of_type(ws, {"frame"})
                assert frame["tick"] >= 0
        finally:
            await stop_bridge(server, bridge, task)

    run(scenario())


def test_move_magnet_without_placement_is_an_error():
    async def scenario():
        server, bridge, task, url = await start_bridge()
        try:
            async with websockets.connect(url) as ws:
                await ws.recv()
                await send_cmd(ws, 7, "move_magnet", x=10.0, y=10.0)
                reply = await next_of_type(ws, {"err", "ack"})
                assert reply["type"] == "err" and reply["id"] == 7
        finally:
            await stop_bridge(server, bridge, task)

    run(scenario())


def test_set_speed_clamps_with_warning():
    async def scenario():
        server, bridge, task, url = await start_bridge()
        try:
            async with websockets.connect(url) as ws:
                await ws.recv()
                await send_cmd(ws, 1, "set_speed", multiplier=99.0)
                reply = await next_of_type(ws, {"ack", "err"})
                assert reply["type"] == "ack"
                assert reply["speed"] == 20.0
                assert "warning" in reply
        finally:
            await stop_bridge(server, bridge, task)

    run(scenario())


def test_place_magnet_lights_shepherd_cell():
    async def scenario():
        server, bridge, task, url = await start_bridge()
        try:
            async with websockets.connect(url) as ws:
                await ws.recv()
                await send_cmd(ws, 2, "set_speed", multiplier=20.0)
                await next_of_type(ws, {"ack"})
                # cell (2,0) center in mm
                await send_cmd(ws, 3, "place_magnet", x=0.5 * 75, y=2.5 * 75)
                ack = await next_of_type(ws, {"ack"})
                assert ack["id"] == 3
                for _ in range(20):
                    frame = await next_of_type(ws, {"frame"})
                    if frame["cells"][2][0] == 100:
                        assert frame["magnet"] == {"x": 37.5, "y": 187.5}
                        return
                raise AssertionError("cell (2,0) never lit after magnet placement")
        finally:
            await stop_bridge(server, bridge, task)

    run(scenario())


def test_pause_resume_without_tick_gaps():
    async def scenario():
        server, bridge, task, url = await start_bridge(frame_every=2)
        try:
            async with websockets.connect(url) as ws:
                await ws.recv()
                before = [await next_of_type(ws, {"frame"}) for _ in range(3)]
                await send_cmd(ws, 1, "pause")
                await next_of_type(ws, {"ack"})
                paused_tick = bridge.session.tick
                await asyncio.sleep(0.2)
                assert bridge.session.tick == paused_tick  # frozen
                await send_cmd(ws, 2, "resume")
                await next_of_type(ws, {"ack"})
                after = [await next_of_type(ws, {"frame"}) for _ in range(3)]
                ticks = [f["tick"] for f in before + after]
                deltas = [b - a for a, b in zip(ticks, ticks[1:])]
                assert all(d == 2 for d in deltas), ticks  # no gaps, no repeats
        finally:
            await stop_bridge(server, bridge, task)

    run(scenario())


# --- shepherding interaction and replay ----------------------------------------------


def drag_script(column, ticks_per_row=150):
    """(tick, x, y) waypoints sweeping a column top to bottom."""
    x = (column + 0.5) * 75.0
    return [(row * ticks_per_row, x, (row + 0.5) * 75.0) for row in range(5)]


def test_scripted_drag_recedes_robot_columns_and_replays_identically():
    async def scenario():
        server, bridge, task, url = await start_bridge()
        session = bridge.session
        try:
            async with websockets.connect(url) as ws:
                await ws.recv()
                await send_cmd(ws, 0, "set_speed", multiplier=20.0)
                await next_of_type(ws, {"ack"})
                request = 1
                placed = False
                waypoints = drag_script(1) + [
                    (t + 800, x + 75.0, y) for t, x, y in drag_script(1)]
                for tick_target, x, y in waypoints:
                    while session.tick < tick_target:
                        await asyncio.sleep(0.01)
                    kind = "move_magnet" if placed else "place_magnet"
                    await send_cmd(ws, request, kind, x=x, y=y)
                    reply = await next_of_type(ws, {"ack", "err"})
                    assert reply["type"] == "ack", reply
                    placed = True
                    request += 1
                while session.tick < 2000:  # 20 simulated seconds
                    await asyncio.sleep(0.01)
        finally:
            await stop_bridge(server, bridge, task)
        return session, list(bridge.boundary_frames)

    session, frames = run(scenario())

    # both robots' columns strictly receded from the swept columns
    col_tracks = {r["id"]: [] for r in frames[0]["robots"]}
    for frame in frames:
        for robot in frame["robots"]:
            col_tracks[robot["id"]].append(int(robot["x"] // 75.0))
    for rid, track in col_tracks.items():
        assert track[0] == 2
        assert track[-1] >= 4, (rid, track[-1])
        assert all(b >= a for a, b in zip(track, track[1:])), rid  # never back toward

    # a robot moved within 10 simulated seconds of the drag start
    early = [f for f in frames if f["tick"] <= 1000]
    assert any(int(r["x"] // 75.0) > 2 for f in early for r in f["robots"])

    # command-log replay reproduces the identical frame stream
    total = frames[-1]["tick"]
    replayed = replay(session.spec, session.command_log, total)
    live_by_tick = {f["tick"]: f for f in frames if f["tick"] <= total}
    replay_by_tick = {f["tick"]: f for f in replayed}
    assert frame_content_hash([live_by_tick[t] for t in sorted(live_by_tick)]) == \
        frame_content_hash([replay_by_tick[t] for t in sorted(live_by_tick)])

    run_again = replay(session.spec, session.command_log, total)
    assert frame_content_hash(run_again) == frame_content_hash(replayed)


def test_command_log_round_trips_through_disk(tmp_path):
    spec = load_builtin("shepherding")
    session = Session(spec)
    session.tick_once()
    session.apply_command("place_magnet", {"x": 112.5, "y": 37.5})
    for _ in range(5):
        session.tick_once()
    session.apply_command("move_magnet", {"x": 112.5, "y": 112.5})
    path = tmp_path / "commands.jsonl"
    session.save_log(path)
    entries = load_command_log(path)
    assert [(e.tick, e.kind) for e in entries] == \
        [(e.tick, e.kind) for e in session.command_log]
    assert entries[0].args == {"x": 112.5, "y": 37.5}


def test_reset_restarts_from_tick_zero():
    spec = load_builtin("shepherding")
    session = Session(spec)
    for _ in range(10):
        session.tick_once()
    assert session.tick == 10
    session.apply_command("reset", {})
    assert session.tick == 0
    session.tick_once()
    assert session.tick == 1


def test_session_scripted_magnet_respected_when_not_interactive():
    spec = load_builtin("pheromone")
    session = Session(spec, interactive=False)
    session.tick_once()
    assert session.world.free_magnet is not None  # script placed it at tick 0
    interactive = Session(spec, interactive=True)
    interactive.tick_once()
    assert interactive.world.free_magnet is None


def test_broadcast_drops_oldest_under_backpressure():
    spec = load_builtin("shepherding")
    bridge = BridgeServer(spec)

    async def scenario():
        queue = asyncio.Queue(maxsize=3)
        bridge.queues["slow-client"] = queue
        for seq in range(10):  # a slow client never drains its queue
            bridge._broadcast({"seq": seq})
        assert queue.qsize() == 3
        remaining = [queue.get_nowait()["seq"] for _ in range(3)]
        assert remaining == [7, 8, 9]  # oldest frames dropped, newest kept

    asyncio.run(scenario())
