import { describe, expect, it } from "vitest";

import { RateLimiter } from "../src/rate.js";

/** Manual clock + scheduler so throttling is tested deterministically. */
class FakeTime {
  now = 0;
  private timers: { at: number; fn: () => void; id: number }[] = [];
  private nextId = 1;

  clock = () => this.now;

  schedule = (fn: () => void, ms: number) => {
    const id = this.nextId++;
    this.timers.push({ at: this.now + ms, fn, id });
    return id as unknown as ReturnType<typeof setTimeout>;
  };

  cancel = (id: ReturnType<typeof setTimeout>) => {
    this.timers = this.timers.filter((t) => t.id !== (id as unknown as number));
  };

  advance(ms: number): void {
    const target = this.now + ms;
    for (;;) {
      this.timers.sort((a, b) => a.at - b.at);
      const next = this.timers[0];
      if (!next || next.at > target) break;
      this.timers.shift();
      this.now = next.at;
      next.fn();
    }
    this.now = target;
  }
}

function setup(maxHz = 60) {
  const time = new FakeTime();
  const sent: { value: number; at: number }[] = [];
  const limiter = new RateLimiter<number>(
    (v) => sent.push({ value: v, at: time.now }),
    maxHz, time.clock, time.schedule, time.cancel);
  return { time, sent, limiter };
}

describe("rate limiter", () => {
  it("passes isolated updates through immediately", () => {
    const { time, sent, limiter } = setup();
    limiter.push(1);
    time.advance(100);
    limiter.push(2);
    expect(sent.map((s) => s.value)).toEqual([1, 2]);
  });

  it("caps a burst at the configured rate, keeping the trailing value", () => {
    const { time, sent, limiter } = setup(60);
    for (let i = 0; i < 100; i++) {
      limiter.push(i);
      time.advance(1); // 1000 Hz burst
    }
    time.advance(50); // let the trailing send flush
    const interval = 1000 / 60;
    for (let i = 1; i < sent.length; i++) {
      expect(sent[i].at - sent[i - 1].at).toBeGreaterThanOrEqual(interval - 1e-9);
    }
    expect(sent.length).toBeLessThanOrEqual(Math.ceil(100 / interval) + 2);
    expect(sent[sent.length - 1].value).toBe(99); // sample-and-hold tail
  });

  it("reset drops pending sends", () => {
    const { time, sent, limiter } = setup(60);
    limiter.push(1);
    limiter.push(2); // queued behind the cap
    limiter.reset();
    time.advance(1000);
    expect(sent.map((s) => s.value)).toEqual([1]);
  });
});
