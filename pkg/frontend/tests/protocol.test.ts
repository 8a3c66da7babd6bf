import { describe, expect, it } from "vitest";

import {
  COMMAND_KINDS,
  Command,
  parseServerMessage,
  serializeCommand,
} from "../src/protocol.js";

const SAMPLES: Command[] = [
  { kind: "place_magnet", x: 112.5, y: 37.5 },
  { kind: "move_magnet", x: 150, y: 150 },
  { kind: "remove_magnet" },
  { kind: "pause" },
  { kind: "resume" },
  { kind: "set_speed", multiplier: 2.5 },
  { kind: "reset" },
  { kind: "load_scenario", name: "shepherding" },
];

describe("command serialization", () => {
  it("covers every command kind", () => {
    expect(SAMPLES.map((c) => c.kind)).toEqual(COMMAND_KINDS);
  });

  it("emits the wire schema {type, id, kind, args}", () => {
    for (const command of SAMPLES) {
      const wire = JSON.parse(serializeCommand(command, 7));
      expect(wire.type).toBe("cmd");
      expect(wire.id).toBe(7);
      expect(wire.kind).toBe(command.kind);
      const { kind, ...args } = command;
      expect(wire.args).toEqual(args);
    }
  });
});

describe("server message parsing", () => {
  const frame = {
    type: "frame", v: 1, seq: 3, tick: 25, scenario: "shepherding",
    rows: 2, cols: 2, cell_pitch: 75,
    cells: [[0, 100], [0, 0]], lit: [[0, 1], [0, 0]],
    robots: [{ id: "r0", x: 10, y: 20, theta: 0, behavior: "flee_light" }],
    magnet: null, paused: false, speed: 1,
  };

  it("accepts frames, acks and errors", () => {
    expect(parseServerMessage(JSON.stringify(frame)).type).toBe("frame");
    const ack = parseServerMessage(JSON.stringify({ type: "ack", id: 4, tick: 9 }));
    expect(ack).toMatchObject({ type: "ack", id: 4, tick: 9 });
    const err = parseServerMessage(
      JSON.stringify({ type: "err", id: 4, message: "no magnet placed" }));
    expect(err).toMatchObject({ type: "err", message: "no magnet placed" });
  });

  it("rejects malformed payloads", () => {
    expect(() => parseServerMessage("not json")).toThrow(/unparseable/);
    expect(() => parseServerMessage("42")).toThrow(/not an object/);
    expect(() => parseServerMessage(JSON.stringify({ type: "nope" })))
      .toThrow(/unknown server message/);
    expect(() => parseServerMessage(JSON.stringify({ ...frame, v: 2 })))
      .toThrow(/version/);
    expect(() => parseServerMessage(JSON.stringify({ ...frame, cells: "x" })))
      .toThrow(/malformed frame/);
  });
});
