// Rate limiter for magnet-drag commands: at most maxPerSecond sends, with the
// latest suppressed value flushed once the window allows (so the magnet never
// sticks short of the pointer).

export type Clock = () => number; // ms

export class CommandThrottle<T> {
  private readonly minIntervalMs: number;
  private lastSentAt = -Infinity;
  private pending: T | null = null;

  constructor(
    private readonly send: (value: T) => void,
    maxPerSecond = 30,
    private readonly now: Clock = () => Date.now(),
  ) {
    this.minIntervalMs = 1000 / maxPerSecond;
  }

  submit(value: T): void {
    const t = this.now();
    if (t - this.lastSentAt >= this.minIntervalMs) {
      this.lastSentAt = t;
      this.pending = null;
      this.send(value);
    } else {
      this.pending = value;
    }
  }

  /** Deliver the most recent suppressed value if the window has elapsed. */
  flush(): void {
    if (this.pending === null) return;
    const t = this.now();
    if (t - this.lastSentAt >= this.minIntervalMs) {
      this.lastSentAt = t;
      const value = this.pending;
      this.pending = null;
      this.send(value);
    }
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }
}
