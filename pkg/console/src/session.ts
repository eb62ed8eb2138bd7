// Operator session state machine, independent of the DOM so it can be
// driven by tests through a fake socket. Owns: the bridge connection and
// reconnect policy, the disconnect banner timing, slider/gamepad command
// flow (rate-capped), and recording control.

import {
  BridgeMessage,
  ErrorMsg,
  Hello,
  RecStop,
  ViewFrame,
  ViewState,
  decode,
  encode,
  leadGrip,
  leadSet,
} from "./messages.js";
import { Clock, RateLimiter } from "./rate.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionHooks {
  onState?: (state: ViewState) => void;
  onFrame?: (frame: ViewFrame) => void;
  onBanner?: (visible: boolean) => void;
  onRole?: (role: string) => void;
  onRecord?: (msg: RecStop | { ok?: boolean; episode_id?: string }) => void;
  onError?: (err: ErrorMsg) => void;
}

export interface SessionOptions {
  url: string;
  socketFactory: SocketFactory;
  hooks?: SessionHooks;
  commandRateHz?: number; // default 60
  bannerAfterMs?: number; // default 1000
  reconnectDelayMs?: number; // default 500
  now?: Clock;
  schedule?: (fn: () => void, ms: number) => ReturnType<typeof setTimeout>;
  cancel?: (id: ReturnType<typeof setTimeout>) => void;
}

export class ConsoleSession {
  readonly sent: BridgeMessage[] = []; // outbound log (tests and debugging)
  connected = false;
  role: string | null = null;
  lastState: ViewState | null = null;
  recording = false;
  joints: number[] = [0, 0, 0, 0, 0, 0];
  grip = 0;

  private socket: SocketLike | null = null;
  // One limiter per command channel: the trailing value of each must flow.
  private readonly jointLimiter: RateLimiter<BridgeMessage>;
  private readonly gripLimiter: RateLimiter<BridgeMessage>;
  private bannerTimer: ReturnType<typeof setTimeout> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;
  private readonly schedule: (fn: () => void, ms: number) =>
    ReturnType<typeof setTimeout>;
  private readonly cancel: (id: ReturnType<typeof setTimeout>) => void;

  constructor(private readonly opts: SessionOptions) {
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancel = opts.cancel ?? ((id) => clearTimeout(id));
    const makeLimiter = () => new RateLimiter<BridgeMessage>(
      (msg) => this.transmit(msg),
      opts.commandRateHz ?? 60,
      opts.now ?? (() => Date.now()),
      this.schedule,
      this.cancel,
    );
    this.jointLimiter = makeLimiter();
    this.gripLimiter = makeLimiter();
    this.connect();
  }

  // -- connection lifecycle ------------------------------------------------

  private connect(): void {
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
      if (typeof event.data === "string") this.handleMessage(event.data);
    };
  }

  private handleDisconnect(): void {
    if (this.closed) return;
    this.connected = false;
    this.role = null;
    this.jointLimiter.reset();
    this.gripLimiter.reset();
    if (this.bannerTimer === null) {
      this.bannerTimer = this.schedule(() => {
        this.bannerTimer = null;
        if (!this.connected) this.opts.hooks?.onBanner?.(true);
      }, this.opts.bannerAfterMs ?? 1000);
    }
    this.reconnectTimer = this.schedule(() => {
      this.reconnectTimer = null;
      if (!this.closed) this.connect();
    }, this.opts.reconnectDelayMs ?? 500);
  }

  private clearBanner(): void {
    if (this.bannerTimer !== null) {
      this.cancel(this.bannerTimer);
      this.bannerTimer = null;
    }
  }

  close(): void {
    this.closed = true;
    this.clearBanner();
    if (this.reconnectTimer !== null) this.cancel(this.reconnectTimer);
    this.jointLimiter.reset();
    this.gripLimiter.reset();
    this.socket?.close();
  }

  // -- inbound ---------------------------------------------------------------

  private handleMessage(payload: string): void {
    const msg = decode(payload);
    if (msg === null) return;
    switch (msg.t) {
      case "hello":
        this.role = (msg as Hello).role;
        this.opts.hooks?.onRole?.(this.role);
        break;
      case "view.state": {
        const state = msg as ViewState;
        this.lastState = state;
        this.recording = state.recorder.active;
        this.opts.hooks?.onState?.(state);
        break;
      }
      case "view.frame":
        this.opts.hooks?.onFrame?.(msg as ViewFrame);
        break;
      case "rec.start":
      case "rec.stop":
        if (msg.t === "rec.stop") this.recording = false;
        this.opts.hooks?.onRecord?.(msg as RecStop);
        break;
      case "error":
        this.opts.hooks?.onError?.(msg as ErrorMsg);
        break;
    }
  }

  // -- outbound ---------------------------------------------------------------

  private transmit(msg: BridgeMessage): void {
    if (!this.connected || this.socket === null) return;
    this.socket.send(encode(msg));
    this.sent.push(msg);
  }

  /** Slider or gamepad moved one arm joint. */
  setJoint(index: number, value: number): void {
    if (index < 0 || index > 5) throw new Error(`bad joint index ${index}`);
    this.joints[index] = value;
    this.jointLimiter.push(leadSet(this.joints));
  }

  setJoints(values: number[]): void {
    this.joints = [...leadSet(values).q];
    this.jointLimiter.push(leadSet(this.joints));
  }

  setGrip(value: number): void {
    this.grip = Math.min(1, Math.max(0, value));
    this.gripLimiter.push(leadGrip(this.grip));
  }

  startRecording(prompt: string): void {
    this.transmit({ t: "rec.start", prompt });
  }

  stopRecording(): void {
    this.transmit({ t: "rec.stop" });
  }
}
