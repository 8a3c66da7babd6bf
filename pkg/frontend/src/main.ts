// Browser wiring: canvas, pointer events and playback controls around the
// reducer. Server address comes from ?server=<host:port>.

import { BridgeClient } from "./net.js";
import { buildDrawList, paint } from "./render.js";
import { Action, ViewModel, initialViewModel, reduce } from "./state.js";
import { CommandThrottle } from "./throttle.js";
import { DEFAULT_VIEWPORT, screenToWorld, viewportFor, Viewport } from "./transform.js";
import type { Command } from "./protocol.js";

function start(): void {
  const canvas = document.getElementById("grid") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? "127.0.0.1:8089";

  let model: ViewModel = initialViewModel;
  let view: Viewport = DEFAULT_VIEWPORT;

  const throttle = new CommandThrottle<Command>((cmd) => client.send(cmd), 30);
  setInterval(() => throttle.flush(), 15);

  function dispatch(action: Action): void {
    const result = reduce(model, action);
    model = result.model;
    if (model.frame) {
      view = viewportFor(model.frame.rows, model.frame.cols,
                         model.frame.cell_pitch, canvas.width, canvas.height);
    }
    for (const command of result.commands) {
      if (command.kind === "move_magnet") {
        throttle.submit(command); // drags are rate-limited to 30/s
      } else {
        client.send(command);
      }
    }
    paint(ctx, buildDrawList(model, view, canvas.width, canvas.height));
  }

  const client = new BridgeClient(
    `ws://${server}`,
    {
      onMessage: (message) => {
        if (message.type === "frame") {
          dispatch({ kind: "frame", frame: message });
        } else if (message.type === "err") {
          dispatch({ kind: "server-error", message: message.message });
          setTimeout(() => dispatch({ kind: "toast-clear" }), 4000);
        } else if (message.warning) {
          dispatch({ kind: "server-error", message: message.warning });
          setTimeout(() => dispatch({ kind: "toast-clear" }), 4000);
        }
      },
      onStatus: (status, retryDelayMs) => {
        if (status === "open") dispatch({ kind: "open" });
        else if (status === "retrying") {
          dispatch({ kind: "retrying", delayMs: retryDelayMs ?? 0 });
        } else if (status === "closed") dispatch({ kind: "closed" });
        else dispatch({ kind: "connecting" });
      },
    },
  );
  client.connect();

  function pointerWorld(ev: PointerEvent): [number, number] {
    const rect = canvas.getBoundingClientRect();
    return screenToWorld(view, ev.clientX - rect.left, ev.clientY - rect.top);
  }

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    const [x, y] = pointerWorld(ev);
    dispatch({ kind: "pointer-down", xMm: x, yMm: y });
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (model.drag) {
      const [x, y] = pointerWorld(ev);
      dispatch({ kind: "pointer-move", xMm: x, yMm: y });
    }
  });
  canvas.addEventListener("pointerup", () => dispatch({ kind: "pointer-up" }));

  (document.getElementById("pause") as HTMLButtonElement).onclick =
    () => client.send({ kind: "pause" });
  (document.getElementById("resume") as HTMLButtonElement).onclick =
    () => client.send({ kind: "resume" });
  (document.getElementById("remove-magnet") as HTMLButtonElement).onclick =
    () => client.send({ kind: "remove_magnet" });
  (document.getElementById("reset") as HTMLButtonElement).onclick =
    () => client.send({ kind: "reset" });
  const speed = document.getElementById("speed") as HTMLInputElement;
  speed.onchange = () => client.send({ kind: "set_speed",
                                       multiplier: Number(speed.value) });
}

window.addEventListener("DOMContentLoaded", start);
