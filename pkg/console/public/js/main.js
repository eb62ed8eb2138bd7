// DOM wiring for the operator console. All protocol/state logic lives in
// session.ts; this file only binds controls and renders telemetry.
import { DEFAULT_MAPPING, applyPad } from "./gamepad.js";
import { ConsoleSession } from "./session.js";
const JOINT_RANGE = [
    [-3.05, 3.05], [-2.1, 2.1], [-2.8, 2.8],
    [-2.9, 2.9], [-3.05, 3.05], [-3.05, 3.05],
];
function bridgeUrl() {
    const params = new URLSearchParams(window.location.search);
    return params.get("bridge") ?? "ws://127.0.0.1:5604";
}
function el(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
function fmt(v) {
    return v.toFixed(3);
}
function buildSliders(onChange) {
    const holder = el("sliders");
    const sliders = [];
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
function main() {
    const banner = el("banner");
    const roleBadge = el("role");
    const recStatus = el("rec-status");
    const frameCount = el("frame-count");
    const jointReadout = el("joint-readout");
    const objects = el("objects");
    const baseImg = el("cam-base");
    const wristImg = el("cam-wrist");
    const promptBox = el("prompt");
    const recButton = el("record");
    const gripSlider = el("grip");
    const controls = el("controls");
    const session = new ConsoleSession({
        url: bridgeUrl(),
        socketFactory: (url) => new WebSocket(url),
        hooks: {
            onBanner: (visible) => {
                banner.style.display = visible ? "block" : "none";
                controls.classList.toggle("disabled", visible);
                for (const input of controls.querySelectorAll("input,button")) {
                    input.disabled = visible;
                }
            },
            onRole: (role) => {
                roleBadge.textContent = role;
            },
            onState: (state) => {
                // Displayed values come straight from the bridge payload.
                jointReadout.textContent = state.joints.map(fmt).join("  ");
                recStatus.textContent = state.recorder.active
                    ? `recording ${state.recorder.episode_id}` : "idle";
                frameCount.textContent = String(state.recorder.frames);
                if (state.objects) {
                    const counts = {};
                    for (const o of state.objects) {
                        counts[o.status] = (counts[o.status] ?? 0) + 1;
                    }
                    objects.textContent = Object.entries(counts)
                        .map(([k, v]) => `${k}:${v}`).join(" ");
                }
                recButton.textContent = state.recorder.active ? "Stop" : "Record";
            },
            onFrame: (frame) => {
                baseImg.src = `data:image/png;base64,${frame.images.base}`;
                wristImg.src = `data:image/png;base64,${frame.images.wrist}`;
            },
            onRecord: (msg) => console.log("recorder:", msg),
            onError: (err) => console.warn("bridge error:", err.code, err.message),
        },
    });
    buildSliders((i, v) => session.setJoint(i, v));
    gripSlider.addEventListener("input", () => session.setGrip(Number(gripSlider.value)));
    recButton.addEventListener("click", () => {
        if (session.recording)
            session.stopRecording();
        else
            session.startRecording(promptBox.value);
    });
    // Gamepad polling at display rate; sends flow through the session's cap.
    let lastPoll = performance.now();
    const poll = () => {
        const pads = navigator.getGamepads ? navigator.getGamepads() : [];
        const pad = pads && pads[0];
        const now = performance.now();
        if (pad) {
            const result = applyPad(session.joints, session.grip, { axes: [...pad.axes] }, now - lastPoll, DEFAULT_MAPPING);
            if (result.changed) {
                session.setJoints(result.joints);
                if (result.grip !== session.grip)
                    session.setGrip(result.grip);
            }
        }
        lastPoll = now;
        requestAnimationFrame(poll);
    };
    requestAnimationFrame(poll);
}
window.addEventListener("DOMContentLoaded", main);
