import { describe, expect, it } from "vitest";

import { ConsoleSession, SocketLike } from "../src/session.js";

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

class FakeSocket implements SocketLike {
  static instances: FakeSocket[] = [];
  sentRaw: string[] = [];
  closed = false;
  onopen: (() => void) | null = null;
  onclose: (() => void) | null = null;
  onmessage: ((event: { data: unknown }) => void) | null = null;

  constructor(readonly url: string) {
    FakeSocket.instances.push(this);
  }

  send(data: string): void {
    this.sentRaw.push(data);
  }

  close(): void {
    this.closed = true;
  }

  open(): void {
    this.onopen?.();
  }

  drop(): void {
    this.onclose?.();
  }

  feed(msg: object): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  sent(): { t: string }[] {
    return this.sentRaw.map((s) => JSON.parse(s));
  }
}

function setup(opts: { bannerAfterMs?: number } = {}) {
  FakeSocket.instances = [];
  const time = new FakeTime();
  const banners: boolean[] = [];
  const states: unknown[] = [];
  const session = new ConsoleSession({
    url: "ws://test",
    socketFactory: (url) => new FakeSocket(url),
    hooks: {
      onBanner: (visible) => banners.push(visible),
      onState: (s) => states.push(s),
    },
    now: time.clock,
    schedule: time.schedule,
    cancel: time.cancel,
    bannerAfterMs: opts.bannerAfterMs ?? 1000,
  });
  const socket = FakeSocket.instances[0];
  return { session, socket, time, banners, states };
}

describe("console session", () => {
  it("sends a full leader sample on connect", () => {
    const { socket } = setup();
    socket.open();
    const kinds = socket.sent().map((m) => m.t);
    expect(kinds).toEqual(["lead.set", "lead.grip"]);
  });

  it("rate-caps slider streams and keeps the trailing value", () => {
    const { session, socket, time } = setup();
    socket.open();
    const initial = socket.sentRaw.length;
    for (let i = 0; i < 200; i++) {
      session.setJoint(0, i / 1000);
      time.advance(2); // 500 Hz burst for 400 ms
    }
    time.advance(100);
    const sets = socket.sent().slice(initial)
      .filter((m) => m.t === "lead.set") as { t: string; q: number[] }[];
    // 400 ms at a 60 Hz cap leaves at most ~26 sends, not 200.
    expect(sets.length).toBeLessThanOrEqual(27);
    expect(sets[sets.length - 1].q[0]).toBeCloseTo(0.199, 9);
  });

  it("tracks recorder state from view.state", () => {
    const { session, socket } = setup();
    socket.open();
    socket.feed({
      t: "view.state",
      joints: [0, 0, 0, 0, 0, 0, 0],
      recorder: { active: true, frames: 42, episode_id: "ep1" },
    });
    expect(session.recording).toBe(true);
    expect(session.lastState?.recorder.frames).toBe(42);
  });

  it("shows the banner within the configured delay after a drop", () => {
    const { socket, time, banners } = setup({ bannerAfterMs: 1000 });
    socket.open();
    expect(banners).toEqual([false]);
    socket.drop();
    time.advance(999);
    expect(banners).toEqual([false]);
    time.advance(2);
    expect(banners).toEqual([false, true]);
  });

  it("reconnects and resumes without recreating the session", () => {
    const { session, socket, time, banners } = setup();
    socket.open();
    session.setJoint(0, 0.5);
    socket.drop();
    time.advance(600); // past the reconnect delay
    const second = FakeSocket.instances[1];
    expect(second).toBeDefined();
    second.open();
    expect(banners[banners.length - 1]).toBe(false);
    // The fresh connection re-announces the held leader pose.
    const kinds = second.sent().map((m) => m.t);
    expect(kinds[0]).toBe("lead.set");
    expect((second.sent()[0] as { q: number[] }).q[0]).toBeCloseTo(0.5);
  });

  it("suppresses command sends while disconnected", () => {
    const { session, socket, time } = setup();
    socket.open();
    socket.drop();
    const before = socket.sentRaw.length;
    session.setJoint(1, 0.3);
    time.advance(200);
    expect(socket.sentRaw.length).toBe(before);
  });

  it("drives recording start/stop", () => {
    const { session, socket } = setup();
    socket.open();
    session.startRecording("grab them all");
    expect(socket.sent().pop()).toEqual(
      { t: "rec.start", prompt: "grab them all" });
    socket.feed({
      t: "view.state", joints: [0, 0, 0, 0, 0, 0, 0],
      recorder: { active: true, frames: 1, episode_id: "e" },
    });
    session.stopRecording();
    expect(socket.sent().pop()).toEqual({ t: "rec.stop" });
  });
});
