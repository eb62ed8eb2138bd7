// Bridge message types and codecs. Mirrors schema.json.

export interface LeadSet {
  t: "lead.set";
  q: number[];
}

export interface LeadGrip {
  t: "lead.grip";
  g: number;
}

export interface RecStart {
  t: "rec.start";
  prompt?: string;
  ok?: boolean;
  episode_id?: string;
}

export interface RecStop {
  t: "rec.stop";
  ok?: boolean;
  episode_id?: string;
  frames?: number;
  path?: string | null;
  truncated?: boolean;
}

export interface Hello {
  t: "hello";
  role: "controller" | "observer";
}

export interface RecorderStatus {
  active: boolean;
  frames: number;
  episode_id: string | null;
}

export interface ViewState {
  t: "view.state";
  joints: number[];
  tcp?: { pos: number[]; yaw: number };
  objects?: { id: number; status: string }[];
  recorder: RecorderStatus;
  t_ms?: number;
}

export interface ViewFrame {
  t: "view.frame";
  images: { base: string; wrist: string };
  t_ms?: number;
}

export interface ErrorMsg {
  t: "error";
  code: string;
  message?: string;
}

export type BridgeMessage =
  | LeadSet
  | LeadGrip
  | RecStart
  | RecStop
  | Hello
  | ViewState
  | ViewFrame
  | ErrorMsg;

export function leadSet(q: number[]): LeadSet {
  if (q.length !== 6) {
    throw new Error(`lead.set needs exactly 6 joints, got ${q.length}`);
  }
  return { t: "lead.set", q: [...q] };
}

export function leadGrip(g: number): LeadGrip {
  if (!(g >= 0 && g <= 1)) {
    throw new Error(`lead.grip g must be in [0, 1], got ${g}`);
  }
  return { t: "lead.grip", g };
}

export function encode(msg: BridgeMessage): string {
  return JSON.stringify(msg);
}

/** Parse an incoming payload; returns null for junk rather than throwing. */
export function decode(payload: string): BridgeMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(payload);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const t = (doc as { t?: unknown }).t;
  if (typeof t !== "string") return null;
  switch (t) {
    case "view.state": {
      const m = doc as ViewState;
      if (!Array.isArray(m.joints) || m.joints.length !== 7) return null;
      if (typeof m.recorder !== "object" || m.recorder === null) return null;
      return m;
    }
    case "view.frame": {
      const m = doc as ViewFrame;
      if (!m.images || typeof m.images.base !== "string" ||
          typeof m.images.wrist !== "string") return null;
      return m;
    }
    case "hello":
    case "lead.set":
    case "lead.grip":
    case "rec.start":
    case "rec.stop":
    case "error":
      return doc as BridgeMessage;
    default:
      return null;
  }
}
