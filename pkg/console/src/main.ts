// DOM wiring for the operator console. All protocol/state logic lives in
// session.ts; this file only binds controls and renders telemetry.

import { DEFAULT_MAPPING, applyPad } from "./gamepad.js";
import { ViewFrame, ViewState } from "./messages.js";
import { ConsoleSession } from "./session.js";

const JOINT_RANGE: [number, number][] = [
  [-3.05, 3.05], [-2.1, 2.1], [-2.8, 2.8],
  [-2.9, 2.9], [-3.05, 3.05], [-3.05, 3.05],
];

function bridgeUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("bridge") ?? "ws://127.0.0.1:5604";
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmt(v: number): string {
  return v.toFixed(3);
}

function buildSliders(onChange: (index: number, value: number) => void) {
  const holder = el<HTMLDivElement>("sliders");
  const sliders: HTMLInputElement[] = [];
  JOINT_RANGE.forEach(([lo, hi], i) => {
    const row = document.createElement("div");
    row.className = "slider-row";
    const label = document.createElement("label");
    label.textContent = `J${i}`;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(lo);
    input.max = String(hi);
    input.step = "0.001";
    input.value = "0";
    const value = document.createElement("span");
    value.textContent = fmt(0);
    input.addEventListener("input", () => {
      value.textContent = fmt(Number(input.value));
      onChange(i, Number(input.value));
    });
    row.append(label, input, value);
    holder.append(row);
    sliders.push(input);
  });
  return sliders;
}

function main(): void {
  const banner = el<HTMLDivElement>("banner");
  const roleBadge = el<HTMLSpanElement>("role");
  const recStatus = el<HTMLSpanElement>("rec-status");
  const frameCount = el<HTMLSpanElement>("frame-count");
  const jointReadout = el<HTMLDivElement>("joint-readout");
  const objects = el<HTMLSpanElement>("objects");
  const baseImg = el<HTMLImageElement>("cam-base");
  const wristImg = el<HTMLImageElement>("cam-wrist");
  const promptBox = el<HTMLInputElement>("prompt");
  const recButton = el<HTMLButtonElement>("record");
  const gripSlider = el<HTMLInputElement>("grip");
  const controls = el<HTMLDivElement>("controls");

  const session = new ConsoleSession({
    url: bridgeUrl(),
    socketFactory: (url) => new WebSocket(url) as unknown as
      import("./session.js").SocketLike,
    hooks: {
      onBanner: (visible) => {
        banner.style.display = visible ? "block" : "none";
        controls.classList.toggle("disabled", visible);
        for (const input of controls.querySelectorAll("input,button")) {
          (input as HTMLInputElement).disabled = visible;
        }
      },
      onRole: (role) => {
        roleBadge.textContent = role;
      },
      onState: (state: ViewState) => {
        // Displayed values come straight from the bridge payload.
        jointReadout.textContent = state.joints.map(fmt).join("  ");
        recStatus.textContent = state.recorder.active
          ? `recording ${state.recorder.episode_id}` : "idle";
        frameCount.textContent = String(state.recorder.frames);
        if (state.objects) {
          const counts: Record<string, number> = {};
          for (const o of state.objects) {
            counts[o.status] = (counts[o.status] ?? 0) + 1;
          }
          objects.textContent = Object.entries(counts)
            .map(([k, v]) => `${k}:${v}`).join(" ");
        }
        recButton.textContent = state.recorder.active ? "Stop" : "Record";
      },
      onFrame: (frame: ViewFrame) => {
        baseImg.src = `data:image/png;base64,${frame.images.base}`;
        wristImg.src = `data:image/png;base64,${frame.images.wrist}`;
      },
      onRecord: (msg) => console.log("recorder:", msg),
      onError: (err) => console.warn("bridge error:", err.code, err.message),
    },
  });

  buildSliders((i, v) => session.setJoint(i, v));
  gripSlider.addEventListener("input", () =>
    session.setGrip(Number(gripSlider.value)));
  recButton.addEventListener("click", () => {
    if (session.recording) session.stopRecording();
    else session.startRecording(promptBox.value);
  });

  // Gamepad polling at display rate; sends flow through the session's cap.
  let lastPoll = performance.now();
  const poll = () => {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const pad = pads && pads[0];
    const now = performance.now();
    if (pad) {
      const result = applyPad(session.joints, session.grip,
        { axes: [...pad.axes] }, now - lastPoll, DEFAULT_MAPPING);
      if (result.changed) {
        session.setJoints(result.joints);
        if (result.grip !== session.grip) session.setGrip(result.grip);
      }
    }
    lastPoll = now;
    requestAnimationFrame(poll);
  };
  requestAnimationFrame(poll);
}

window.addEventListener("DOMContentLoaded", main);
