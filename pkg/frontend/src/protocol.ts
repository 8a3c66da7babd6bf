// Wire schema shared with the bridge (versioned). Server pushes frames and
// replies to commands with acks/errors carrying the request id.

export const PROTOCOL_VERSION = 1;

export interface RobotState {
  id: string;
  x: number;
  y: number;
  theta: number;
  behavior: string;
}

export interface MagnetState {
  x: number;
  y: number;
}

export interface StateFrame {
  type: "frame";
  v: number;
  seq: number;
  tick: number;
  scenario: string;
  rows: number;
  cols: number;
  cell_pitch: number;
  cells: number[][];
  lit: number[][];
  robots: RobotState[];
  magnet: MagnetState | null;
  paused: boolean;
  speed: number;
}

export interface Ack {
  type: "ack";
  id: number | string | null;
  tick: number;
  warning?: string;
  speed?: number;
}

export interface Err {
  type: "err";
  id: number | string | null;
  message: string;
}

export type ServerMessage = StateFrame | Ack | Err;

export type Command =
  | { kind: "place_magnet"; x: number; y: number }
  | { kind: "move_magnet"; x: number; y: number }
  | { kind: "remove_magnet" }
  | { kind: "pause" }
  | { kind: "resume" }
  | { kind: "set_speed"; multiplier: number }
  | { kind: "reset" }
  | { kind: "load_scenario"; name: string };

export const COMMAND_KINDS: Command["kind"][] = [
  "place_magnet",
  "move_magnet",
  "remove_magnet",
  "pause",
  "resume",
  "set_speed",
  "reset",
  "load_scenario",
];

export function serializeCommand(command: Command, id: number | string): string {
  const { kind, ...args } = command;
  return JSON.stringify({ type: "cmd", id, kind, args });
}

function isNumberGrid(value: unknown): value is number[][] {
  return Array.isArray(value) && value.every(
    (row) => Array.isArray(row) && row.every((v) => typeof v === "number"));
}

export function parseServerMessage(text: string): ServerMessage {
  let obj: any;
  try {
    obj = JSON.parse(text);
  } catch {
    throw new Error("server sent unparseable JSON");
  }
  if (obj === null || typeof obj !== "object") {
    throw new Error("server message is not an object");
  }
  switch (obj.type) {
    case "frame": {
      if (obj.v !== PROTOCOL_VERSION) {
        throw new Error(`unsupported frame version ${obj.v}`);
      }
      if (typeof obj.tick !== "number" || typeof obj.rows !== "number"
          || typeof obj.cols !== "number" || !isNumberGrid(obj.cells)
          || !Array.isArray(obj.robots)) {
        throw new Error("malformed frame");
      }
      return obj as StateFrame;
    }
    case "ack": {
      if (typeof obj.tick !== "number") throw new Error("malformed ack");
      return obj as Ack;
    }
    case "err": {
      if (typeof obj.message !== "string") throw new Error("malformed error reply");
      return obj as Err;
    }
    default:
      throw new Error(`unknown server message type ${String(obj.type)}`);
  }
}
