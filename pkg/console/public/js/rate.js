// Client-side command rate cap. Slider/gamepad updates can fire far faster
// than the bridge needs; sends are throttled to maxHz with a trailing edge so
// the final value of a burst always goes out (the teleop loop's
// sample-and-hold does the rest).
export class RateLimiter {
    constructor(send, maxHz, now = () => performance.now(), schedule = (fn, ms) => setTimeout(fn, ms), cancel = (id) => clearTimeout(id)) {
        this.send = send;
        this.now = now;
        this.schedule = schedule;
        this.cancel = cancel;
        this.lastSent = -Infinity;
        this.pending = null;
        this.timer = null;
        this.intervalMs = 1000 / maxHz;
    }
    push(value) {
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
    flush() {
        this.timer = null;
        if (this.pending !== null) {
            const value = this.pending;
            this.pending = null;
            this.emit(value);
        }
    }
    emit(value) {
        this.lastSent = this.now();
        this.send(value);
    }
    /** Drop anything queued (used when controls are disabled). */
    reset() {
        this.pending = null;
        if (this.timer !== null) {
            this.cancel(this.timer);
            this.timer = null;
        }
    }
}
