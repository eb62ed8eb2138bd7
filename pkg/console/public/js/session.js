// Operator session state machine, independent of the DOM so it can be
// driven by tests through a fake socket. Owns: the bridge connection and
// reconnect policy, the disconnect banner timing, slider/gamepad command
// flow (rate-capped), and recording control.
import { decode, encode, leadGrip, leadSet, } from "./messages.js";
import { RateLimiter } from "./rate.js";
export class ConsoleSession {
    constructor(opts) {
        this.opts = opts;
        this.sent = []; // outbound log (tests and debugging)
        this.connected = false;
        this.role = null;
        this.lastState = null;
        this.recording = false;
        this.joints = [0, 0, 0, 0, 0, 0];
        this.grip = 0;
        this.socket = null;
        this.bannerTimer = null;
        this.reconnectTimer = null;
        this.closed = false;
        this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
        this.cancel = opts.cancel ?? ((id) => clearTimeout(id));
        const makeLimiter = () => new RateLimiter((msg) => this.transmit(msg), opts.commandRateHz ?? 60, opts.now ?? (() => Date.now()), this.schedule, this.cancel);
        this.jointLimiter = makeLimiter();
        this.gripLimiter = makeLimiter();
        this.connect();
    }
    // -- connection lifecycle ------------------------------------------------
    connect() {
        const socket = this.opts.socketFactory(this.opts.url);
        this.socket = socket;
        socket.onopen = () => {
            this.connected = true;
            this.clearBanner();
            this.opts.hooks?.onBanner?.(false);
            // Push the current pose so the bridge has a full leader sample.
            this.transmit(leadSet(this.joints));
            this.transmit(leadGrip(this.grip));
        };
        socket.onclose = () => this.handleDisconnect();
        socket.onmessage = (event) => {
            if (typeof event.data === "string")
                this.handleMessage(event.data);
        };
    }
    handleDisconnect() {
        if (this.closed)
            return;
        this.connected = false;
        this.role = null;
        this.jointLimiter.reset();
        this.gripLimiter.reset();
        if (this.bannerTimer === null) {
            this.bannerTimer = this.schedule(() => {
                this.bannerTimer = null;
                if (!this.connected)
                    this.opts.hooks?.onBanner?.(true);
            }, this.opts.bannerAfterMs ?? 1000);
        }
        this.reconnectTimer = this.schedule(() => {
            this.reconnectTimer = null;
            if (!this.closed)
                this.connect();
        }, this.opts.reconnectDelayMs ?? 500);
    }
    clearBanner() {
        if (this.bannerTimer !== null) {
            this.cancel(this.bannerTimer);
            this.bannerTimer = null;
        }
    }
    close() {
        this.closed = true;
        this.clearBanner();
        if (this.reconnectTimer !== null)
            this.cancel(this.reconnectTimer);
        this.jointLimiter.reset();
        this.gripLimiter.reset();
        this.socket?.close();
    }
    // -- inbound ---------------------------------------------------------------
    handleMessage(payload) {
        const msg = decode(payload);
        if (msg === null)
            return;
        switch (msg.t) {
            case "hello":
                this.role = msg.role;
                this.opts.hooks?.onRole?.(this.role);
                break;
            case "view.state": {
                const state = msg;
                this.lastState = state;
                this.recording = state.recorder.active;
                this.opts.hooks?.onState?.(state);
                break;
            }
            case "view.frame":
                this.opts.hooks?.onFrame?.(msg);
                break;
            case "rec.start":
            case "rec.stop":
                if (msg.t === "rec.stop")
                    this.recording = false;
                this.opts.hooks?.onRecord?.(msg);
                break;
            case "error":
                this.opts.hooks?.onError?.(msg);
                break;
        }
    }
    // -- outbound ---------------------------------------------------------------
    transmit(msg) {
        if (!this.connected || this.socket === null)
            return;
        this.socket.send(encode(msg));
        this.sent.push(msg);
    }
    /** Slider or gamepad moved one arm joint. */
    setJoint(index, value) {
        if (index < 0 || index > 5)
            throw new Error(`bad joint index ${index}`);
        this.joints[index] = value;
        this.jointLimiter.push(leadSet(this.joints));
    }
    setJoints(values) {
        this.joints = [...leadSet(values).q];
        this.jointLimiter.push(leadSet(this.joints));
    }
    setGrip(value) {
        this.grip = Math.min(1, Math.max(0, value));
        this.gripLimiter.push(leadGrip(this.grip));
    }
    startRecording(prompt) {
        this.transmit({ t: "rec.start", prompt });
    }
    stopRecording() {
        this.transmit({ t: "rec.stop" });
    }
}
