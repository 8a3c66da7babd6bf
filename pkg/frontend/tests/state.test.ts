import { describe, expect, it } from "vitest";

import type { StateFrame } from "../src/protocol.js";
import { initialViewModel, reduce, ViewModel } from "../src/state.js";

function frame(overrides: Partial<StateFrame> = {}): StateFrame {
  return {
    type: "frame", v: 1, seq: 1, tick: 10, scenario: "shepherding",
    rows: 5, cols: 5, cell_pitch: 75,
    cells: Array.from({ length: 5 }, () => [0, 0, 0, 0, 0]),
    lit: Array.from({ length: 5 }, () => [0, 0, 0, 0, 0]),
    robots: [], magnet: null, paused: false, speed: 1,
    ...overrides,
  };
}

function connected(overrides: Partial<StateFrame> = {}): ViewModel {
  let model = initialViewModel;
  model = reduce(model, { kind: "open" }).model;
  model = reduce(model, { kind: "frame", frame: frame(overrides) }).model;
  return model;
}

describe("connection lifecycle", () => {
  it("tracks status and keeps the last frame through a retry", () => {
    let model = connected();
    expect(model.connection).toBe("open");
    model = reduce(model, { kind: "retrying", delayMs: 500 }).model;
    expect(model.connection).toBe("retrying");
    expect(model.retryDelayMs).toBe(500);
    expect(model.frame).not.toBeNull(); // last frame stays visible
  });

  it("tick counter is monotone across frames and reconnects", () => {
    let model = connected({ tick: 10 });
    model = reduce(model, { kind: "retrying", delayMs: 100 }).model;
    model = reduce(model, { kind: "open" }).model;
    model = reduce(model, { kind: "frame", frame: frame({ tick: 45 }) }).model;
    expect(model.lastTick).toBe(45);
    model = reduce(model, { kind: "frame", frame: frame({ tick: 50 }) }).model;
    expect(model.lastTick).toBe(50);
  });
});

describe("magnet dragging", () => {
  it("pointer-down on an empty grid places the magnet and starts a drag", () => {
    const model = connected();
    const result = reduce(model, { kind: "pointer-down", xMm: 100, yMm: 200 });
    expect(result.commands).toEqual([{ kind: "place_magnet", x: 100, y: 200 }]);
    expect(result.model.drag).toEqual({ xMm: 100, yMm: 200 });
  });

  it("pointer-down grabs an existing magnet only near its glyph", () => {
    const model = connected({ magnet: { x: 112.5, y: 187.5 } });
    const miss = reduce(model, { kind: "pointer-down", xMm: 300, yMm: 300 });
    expect(miss.commands).toEqual([]);
    expect(miss.model.drag).toBeNull();
    const grab = reduce(model, { kind: "pointer-down", xMm: 120, yMm: 180 });
    expect(grab.commands).toEqual([]); // grabbing emits nothing until it moves
    expect(grab.model.drag).not.toBeNull();
  });

  it("drag moves emit move_magnet clamped to the grid bounds", () => {
    let model = connected();
    model = reduce(model, { kind: "pointer-down", xMm: 100, yMm: 200 }).model;
    const result = reduce(model, { kind: "pointer-move", xMm: 9999, yMm: -50 });
    expect(result.commands).toEqual([{ kind: "move_magnet", x: 375, y: 0 }]);
  });

  it("release keeps the magnet in place", () => {
    let model = connected();
    model = reduce(model, { kind: "pointer-down", xMm: 100, yMm: 200 }).model;
    const result = reduce(model, { kind: "pointer-up" });
    expect(result.commands).toEqual([]); // no remove on release
    expect(result.model.drag).toBeNull();
  });

  it("ignores pointers while disconnected", () => {
    let model = connected();
    model = reduce(model, { kind: "closed" }).model;
    const result = reduce(model, { kind: "pointer-down", xMm: 10, yMm: 10 });
    expect(result.commands).toEqual([]);
  });
});

describe("server errors", () => {
  it("surface as a toast and clear on demand", () => {
    let model = connected();
    model = reduce(model, { kind: "server-error", message: "no magnet placed" }).model;
    expect(model.toast).toBe("no magnet placed");
    model = reduce(model, { kind: "toast-clear" }).model;
    expect(model.toast).toBeNull();
  });
});
