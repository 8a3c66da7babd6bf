// Websocket client with exponential reconnect backoff and request-id
// bookkeeping. The socket constructor is injectable so tests can run against
// node's `ws` or a fake.

import { Command, ServerMessage, parseServerMessage, serializeCommand } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientEvents {
  onMessage: (message: ServerMessage) => void;
  onStatus: (status: "connecting" | "open" | "retrying" | "closed",
             retryDelayMs?: number) => void;
}

export function backoffDelay(attempt: number, baseMs = 500, maxMs = 10_000): number {
  return Math.min(maxMs, Math.round(baseMs * 2 ** Math.max(0, attempt - 1)));
}

export class BridgeClient {
  private socket: SocketLike | null = null;
  private attempt = 0;
  private stopped = false;
  private nextId = 1;

  constructor(
    private readonly url: string,
    private readonly events: ClientEvents,
    private readonly makeSocket: SocketFactory =
      (u) => new WebSocket(u) as unknown as SocketLike,
    private readonly schedule: (fn: () => void, ms: number) => void =
      (fn, ms) => { setTimeout(fn, ms); },
  ) {}

  connect(): void {
    this.events.onStatus("connecting");
    this.open();
  }

  private open(): void {
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempt = 0;
      this.events.onStatus("open");
    };
    socket.onmessage = (ev) => {
      try {
        this.events.onMessage(parseServerMessage(String(ev.data)));
      } catch {
        // tolerate a malformed server line rather than dropping the session
      }
    };
    socket.onerror = () => { /* close handles retries */ };
    socket.onclose = () => {
      if (this.stopped) {
        this.events.onStatus("closed");
        return;
      }
      this.attempt += 1;
      const delay = backoffDelay(this.attempt);
      this.events.onStatus("retrying", delay);
      this.schedule(() => {
        if (!this.stopped) this.open();
      }, delay);
    };
  }

  /** Send a command; returns the request id used. */
  send(command: Command): number {
    const id = this.nextId++;
    if (this.socket) {
      this.socket.send(serializeCommand(command, id));
    }
    return id;
  }

  close(): void {
    this.stopped = true;
    this.socket?.close();
  }
}
