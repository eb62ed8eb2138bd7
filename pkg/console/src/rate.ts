// Client-side command rate cap. Slider/gamepad updates can fire far faster
// than the bridge needs; sends are throttled to maxHz with a trailing edge so
// the final value of a burst always goes out (the teleop loop's
// sample-and-hold does the rest).

export type Clock = () => number; // milliseconds

export class RateLimiter<T> {
  private lastSent = -Infinity;
  private pending: T | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  readonly intervalMs: number;

  constructor(
    private readonly send: (value: T) => void,
    maxHz: number,
    private readonly now: Clock = () => performance.now(),
    private readonly schedule: (fn: () => void, ms: number) =>
      ReturnType<typeof setTimeout> = (fn, ms) => setTimeout(fn, ms),
    private readonly cancel: (id: ReturnType<typeof setTimeout>) => void =
      (id) => clearTimeout(id),
  ) {
    this.intervalMs = 1000 / maxHz;
  }

  push(value: T): void {
    const elapsed = this.now() - this.lastSent;
    if (elapsed >= this.intervalMs) {
      this.emit(value);
      return;
    }
    this.pending = value;
    if (this.timer === null) {
      this.timer = this.schedule(() => this.flush(), this.intervalMs - elapsed);
    }
  }

  private flush(): void {
    this.timer = null;
    if (this.pending !== null) {
      const value = this.pending;
      this.pending = null;
      this.emit(value);
    }
  }

  private emit(value: T): void {
    this.lastSent = this.now();
    this.send(value);
  }

  /** Drop anything queued (used when controls are disabled). */
  reset(): void {
    this.pending = null;
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
  }
}
