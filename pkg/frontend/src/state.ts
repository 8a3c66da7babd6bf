// Single state reducer: network events and pointer events all funnel here.
// Rendering is a pure function of the ViewModel (see render.ts).

import type { Command, StateFrame } from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "retrying" | "closed";

export interface DragState {
  xMm: number;
  yMm: number;
}

export interface ViewModel {
  connection: ConnectionStatus;
  retryDelayMs: number | null;
  frame: StateFrame | null;
  lastTick: number;
  drag: DragState | null;
  toast: string | null;
}

export const initialViewModel: ViewModel = {
  connection: "connecting",
  retryDelayMs: null,
  frame: null,
  lastTick: -1,
  drag: null,
  toast: null,
};

export type Action =
  | { kind: "connecting" }
  | { kind: "open" }
  | { kind: "retrying"; delayMs: number }
  | { kind: "closed" }
  | { kind: "frame"; frame: StateFrame }
  | { kind: "server-error"; message: string }
  | { kind: "pointer-down"; xMm: number; yMm: number }
  | { kind: "pointer-move"; xMm: number; yMm: number }
  | { kind: "pointer-up" }
  | { kind: "toast-clear" };

export interface Reduction {
  model: ViewModel;
  commands: Command[];
}

function clampToFrame(frame: StateFrame | null, xMm: number, yMm: number): [number, number] {
  if (!frame) return [xMm, yMm];
  const w = frame.cols * frame.cell_pitch;
  const h = frame.rows * frame.cell_pitch;
  return [Math.min(Math.max(xMm, 0), w), Math.min(Math.max(yMm, 0), h)];
}

const MAGNET_GRAB_RADIUS_MM = 30;

export function reduce(model: ViewModel, action: Action): Reduction {
  switch (action.kind) {
    case "connecting":
      return { model: { ...model, connection: "connecting" }, commands: [] };
    case "open":
      return { model: { ...model, connection: "open", retryDelayMs: null }, commands: [] };
    case "retrying":
      // the last frame stays visible behind the reconnect banner
      return {
        model: { ...model, connection: "retrying", retryDelayMs: action.delayMs },
        commands: [],
      };
    case "closed":
      return { model: { ...model, connection: "closed", drag: null }, commands: [] };
    case "frame": {
      const lastTick = Math.max(model.lastTick, action.frame.tick);
      return { model: { ...model, frame: action.frame, lastTick }, commands: [] };
    }
    case "server-error":
      return { model: { ...model, toast: action.message }, commands: [] };
    case "toast-clear":
      return { model: { ...model, toast: null }, commands: [] };

    case "pointer-down": {
      if (model.connection !== "open" || !model.frame) {
        return { model, commands: [] };
      }
      const [x, y] = clampToFrame(model.frame, action.xMm, action.yMm);
      const magnet = model.frame.magnet;
      if (magnet) {
        const grabbed = Math.hypot(magnet.x - x, magnet.y - y) <= MAGNET_GRAB_RADIUS_MM;
        if (!grabbed) return { model, commands: [] };
        return { model: { ...model, drag: { xMm: x, yMm: y } }, commands: [] };
      }
      // empty grid: pointer-down places the magnet and starts dragging it
      return {
        model: { ...model, drag: { xMm: x, yMm: y } },
        commands: [{ kind: "place_magnet", x, y }],
      };
    }
    case "pointer-move": {
      if (!model.drag || !model.frame) return { model, commands: [] };
      const [x, y] = clampToFrame(model.frame, action.xMm, action.yMm);
      return {
        model: { ...model, drag: { xMm: x, yMm: y } },
        commands: [{ kind: "move_magnet", x, y }],
      };
    }
    case "pointer-up":
      // release keeps the magnet where it is; a dedicated control removes it
      return { model: { ...model, drag: null }, commands: [] };
  }
}
