// Rendering splits into a pure draw-list builder (snapshot-testable) and a
// thin canvas painter. Cell brightness maps to fill opacity, robots are discs
// with a heading tick, the shepherd magnet is a distinct ring. Frames are
// ground truth: no interpolation between them.

import type { ViewModel } from "./state.js";
import { Viewport, worldToScreen } from "./transform.js";

export type DrawOp =
  | { op: "clear"; w: number; h: number }
  | { op: "cell"; row: number; col: number; x: number; y: number; size: number;
      opacity: number; lit: boolean }
  | { op: "robot"; id: string; x: number; y: number; r: number;
      tickX: number; tickY: number; behavior: string }
  | { op: "magnet"; x: number; y: number; r: number }
  | { op: "hud"; text: string }
  | { op: "banner"; text: string }
  | { op: "toast"; text: string };

export function buildDrawList(model: ViewModel, view: Viewport,
                              canvasW: number, canvasH: number): DrawOp[] {
  const ops: DrawOp[] = [{ op: "clear", w: canvasW, h: canvasH }];
  const frame = model.frame;
  if (frame) {
    const pitch = frame.cell_pitch;
    for (let r = 0; r < frame.rows; r++) {
      for (let c = 0; c < frame.cols; c++) {
        const [x, y] = worldToScreen(view, c * pitch, r * pitch);
        ops.push({
          op: "cell", row: r, col: c, x, y,
          size: pitch * view.pxPerMm,
          opacity: frame.cells[r][c] / 100,
          lit: frame.lit[r][c] !== 0,
        });
      }
    }
    for (const robot of frame.robots) {
      const [x, y] = worldToScreen(view, robot.x, robot.y);
      const radius = 61 * view.pxPerMm; // 122 mm chassis
      ops.push({
        op: "robot", id: robot.id, x, y, r: radius,
        tickX: x + radius * Math.cos(robot.theta),
        tickY: y + radius * Math.sin(robot.theta),
        behavior: robot.behavior,
      });
    }
    if (frame.magnet) {
      const [x, y] = worldToScreen(view, frame.magnet.x, frame.magnet.y);
      ops.push({ op: "magnet", x, y, r: 10 * view.pxPerMm });
    }
    const pausedNote = frame.paused ? " [paused]" : "";
    ops.push({
      op: "hud",
      text: `${frame.scenario}  tick ${frame.tick}  x${frame.speed}${pausedNote}`,
    });
  }
  if (model.connection === "retrying") {
    const wait = model.retryDelayMs === null ? "" : ` (retry in ${model.retryDelayMs} ms)`;
    ops.push({ op: "banner", text: `connection lost${wait}` });
  } else if (model.connection === "connecting") {
    ops.push({ op: "banner", text: "connecting..." });
  } else if (model.connection === "closed") {
    ops.push({ op: "banner", text: "disconnected" });
  }
  if (model.toast) {
    ops.push({ op: "toast", text: model.toast });
  }
  return ops;
}

export function paint(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  for (const item of ops) {
    switch (item.op) {
      case "clear":
        ctx.fillStyle = "#10141a";
        ctx.fillRect(0, 0, item.w, item.h);
        break;
      case "cell":
        ctx.fillStyle = `rgba(255, 214, 90, ${item.opacity})`;
        ctx.strokeStyle = item.lit ? "#c8a24a" : "#2a323e";
        ctx.fillRect(item.x, item.y, item.size, item.size);
        ctx.strokeRect(item.x, item.y, item.size, item.size);
        break;
      case "robot":
        ctx.beginPath();
        ctx.arc(item.x, item.y, item.r, 0, 2 * Math.PI);
        ctx.fillStyle = "rgba(90, 170, 255, 0.75)";
        ctx.fill();
        ctx.beginPath();
        ctx.moveTo(item.x, item.y);
        ctx.lineTo(item.tickX, item.tickY);
        ctx.strokeStyle = "#eaf2ff";
        ctx.lineWidth = 2;
        ctx.stroke();
        ctx.lineWidth = 1;
        break;
      case "magnet":
        ctx.beginPath();
        ctx.arc(item.x, item.y, item.r, 0, 2 * Math.PI);
        ctx.strokeStyle = "#ff5d73";
        ctx.lineWidth = 3;
        ctx.stroke();
        ctx.lineWidth = 1;
        break;
      case "hud":
        ctx.fillStyle = "#9fb2c8";
        ctx.font = "13px monospace";
        ctx.fillText(item.text, 8, 14);
        break;
      case "banner":
        ctx.fillStyle = "rgba(180, 40, 40, 0.85)";
        ctx.fillRect(0, 0, ctx.canvas.width, 28);
        ctx.fillStyle = "#fff";
        ctx.font = "14px sans-serif";
        ctx.fillText(item.text, 10, 19);
        break;
      case "toast":
        ctx.fillStyle = "rgba(30, 30, 30, 0.9)";
        ctx.fillRect(10, ctx.canvas.height - 40, ctx.canvas.width - 20, 30);
        ctx.fillStyle = "#ffb0b0";
        ctx.font = "13px sans-serif";
        ctx.fillText(item.text, 18, ctx.canvas.height - 20);
        break;
    }
  }
}
