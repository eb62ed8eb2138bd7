// Gamepad -> virtual leader mapping. Stick axes nudge joints at a
// configured rad/s gain; triggers drive the gripper absolutely.

export interface GamepadMapping {
  axisToJoint: Record<number, number>; // gamepad axis index -> joint index
  gain: number; // rad/s at full deflection
  deadzone: number;
  gripAxis: number | null; // axis whose [-1, 1] maps to gripper [0, 1]
}

export const DEFAULT_MAPPING: GamepadMapping = {
  axisToJoint: { 0: 0, 1: 1, 2: 2, 3: 3 },
  gain: 0.8,
  deadzone: 0.12,
  gripAxis: null,
};

export interface PadSample {
  axes: number[];
}

/** Integrates stick deflection into joint deltas over dtMs. */
export function applyPad(
  joints: number[],
  grip: number,
  pad: PadSample,
  dtMs: number,
  mapping: GamepadMapping = DEFAULT_MAPPING,
): { joints: number[]; grip: number; changed: boolean } {
  const out = [...joints];
  let changed = false;
  for (const [axisStr, joint] of Object.entries(mapping.axisToJoint)) {
    const axis = Number(axisStr);
    const raw = pad.axes[axis] ?? 0;
    if (Math.abs(raw) < mapping.deadzone) continue;
    out[joint] += raw * mapping.gain * (dtMs / 1000);
    changed = true;
  }
  let g = grip;
  if (mapping.gripAxis !== null) {
    const raw = pad.axes[mapping.gripAxis] ?? 0;
    const target = (raw + 1) / 2;
    if (Math.abs(target - grip) > 1e-3) {
      g = Math.min(1, Math.max(0, target));
      changed = true;
    }
  }
  return { joints: out, grip: g, changed };
}
