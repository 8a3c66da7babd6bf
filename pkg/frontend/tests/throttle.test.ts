import { describe, expect, it } from "vitest";

import { CommandThrottle } from "../src/throttle.js";

describe("command throttle", () => {
  it("never exceeds 30 sends per second under a fake clock", () => {
    let now = 0;
    const sent: number[] = [];
    const throttle = new CommandThrottle<number>((v) => sent.push(v), 30, () => now);
    // a 1 kHz pointer stream for one simulated second
    for (let i = 0; i < 1000; i++) {
      now = i;
      throttle.submit(i);
      throttle.flush();
    }
    expect(sent.length).toBeLessThanOrEqual(30);
    expect(sent.length).toBeGreaterThanOrEqual(28);
  });

  it("delivers the latest suppressed value after the window", () => {
    let now = 0;
    const sent: string[] = [];
    const throttle = new CommandThrottle<string>((v) => sent.push(v), 30, () => now);
    throttle.submit("a");       // sent immediately
    throttle.submit("b");       // suppressed
    throttle.submit("c");       // replaces b
    expect(sent).toEqual(["a"]);
    expect(throttle.hasPending).toBe(true);
    now = 40;                   // window elapsed
    throttle.flush();
    expect(sent).toEqual(["a", "c"]);
    expect(throttle.hasPending).toBe(false);
  });

  it("spreads a long drag evenly", () => {
    let now = 0;
    const sent: number[] = [];
    const throttle = new CommandThrottle<number>((v) => sent.push(v), 30, () => now);
    for (let i = 0; i < 3000; i++) {
      now = i;
      throttle.submit(i);
    }
    now = 3100;
    throttle.flush();
    expect(sent.length).toBeLessThanOrEqual(91); // 3.1 s at 30/s
    expect(sent[sent.length - 1]).toBe(2999);    // trailing value arrives
  });
});
