/**
 * Browser entry point: wires the api client, view-model, and renderer to
 * the DOM. All segmentation state lives server-side; this file only
 * fetches, displays, and posts clicks.
 */

import { ApiError, SessionApi, SessionStateDto } from "./api.js";
import {
  ColorMode,
  availableColorModes,
  initialViewState,
  legendEntries,
  pointColors,
  recordClick,
  validateClick,
} from "./state.js";
import { CanvasSurface, autoFit, pickPoint, renderPoints } from "./render.js";

const api = new SessionApi(
  (window as unknown as { HOWSEG_API?: string }).HOWSEG_API ?? "http://127.0.0.1:8008"
);

let view = initialViewState();
let pose = autoFit([], { width: 1, height: 1 });

const canvas = document.getElementById("cloud") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const surface = new CanvasSurface(ctx, canvas.width, canvas.height);

const el = {
  banner: document.getElementById("banner")!,
  legend: document.getElementById("legend")!,
  metrics: document.getElementById("metrics")!,
  iteration: document.getElementById("iteration")!,
  labelInput: document.getElementById("label-input") as HTMLInputElement,
  modeSelect: document.getElementById("mode-select") as HTMLSelectElement,
  sceneFile: document.getElementById("scene-file") as HTMLInputElement,
  sessionField: document.getElementById("session-id") as HTMLInputElement,
  loadButton: document.getElementById("load-session")!,
  simulateButton: document.getElementById("simulate")!,
  history: document.getElementById("history")!,
};

function showBanner(message: string | null): void {
  view = { ...view, banner: message };
  el.banner.textContent = message ?? "";
  el.banner.classList.toggle("visible", message !== null);
}

function redraw(): void {
  const state = view.state;
  if (!state) return;
  renderPoints(surface, state.positions, pointColors(state, view.colorMode), pose);
  el.iteration.textContent = `iteration ${state.iteration} | ${state.n} points`;
  renderLegend(state);
  renderMetrics(state);
  renderHistory();
}

function renderLegend(state: SessionStateDto): void {
  el.legend.innerHTML = "";
  for (const entry of legendEntries(state.label_space)) {
    const item = document.createElement("div");
    item.className = `legend-entry ${entry.kind}`;
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = entry.color;
    item.append(swatch, document.createTextNode(` ${entry.name}`));
    item.addEventListener("click", () => {
      if (entry.kind !== "unknown") {
        el.labelInput.value = entry.name;
        view = { ...view, pendingLabel: entry.name };
      }
    });
    el.legend.append(item);
  }
}

function renderMetrics(state: SessionStateDto): void {
  const m = state.metrics;
  if (!m) {
    el.metrics.textContent = "no ground truth";
    return;
  }
  const fmt = (v: number | null) => (v === null ? "-" : (100 * v).toFixed(1));
  el.metrics.textContent =
    `mIoU base ${fmt(m.miou_b)} | novel ${fmt(m.miou_n)} | all ${fmt(m.miou_a)} | HM ${fmt(m.hm)}`;
}

function renderHistory(): void {
  el.history.innerHTML = "";
  for (const click of view.clickHistory.slice(-12).reverse()) {
    const row = document.createElement("div");
    row.textContent = `#${click.iteration} point ${click.point} -> ${click.labelName}`;
    el.history.append(row);
  }
}

function refreshModeOptions(): void {
  const modes = availableColorModes(view.state);
  el.modeSelect.innerHTML = "";
  for (const mode of modes) {
    const opt = document.createElement("option");
    opt.value = mode;
    opt.textContent = mode;
    el.modeSelect.append(opt);
  }
  el.modeSelect.value = view.colorMode;
}

async function loadSession(sessionId: string): Promise<void> {
  try {
    const state = await api.getState(sessionId);
    view = { ...view, sessionId, state, banner: null };
    if (!availableColorModes(state).includes(view.colorMode)) {
      view = { ...view, colorMode: "prediction" };
    }
    pose = autoFit(state.positions, surface);
    refreshModeOptions();
    showBanner(null);
    redraw();
  } catch (err) {
    showBanner(err instanceof ApiError ? `load failed: ${err.message}` : String(err));
  }
}

async function handleCanvasClick(ev: MouseEvent): Promise<void> {
  const state = view.state;
  const sessionId = view.sessionId;
  if (!state || !sessionId) return;
  const rect = canvas.getBoundingClientRect();
  const picked = pickPoint(
    state.positions, pose, surface,
    ev.clientX - rect.left, ev.clientY - rect.top
  );
  view = { ...view, pendingLabel: el.labelInput.value };
  const problem = validateClick(view, picked);
  if (problem) {
    showBanner(problem);
    return;
  }
  const pointIndex = state.indices[picked!]; // decimated view -> original id
  view = { ...view, requestInFlight: true };
  try {
    const summary = await api.annotate(sessionId, [
      { point: pointIndex, label_name: view.pendingLabel },
    ]);
    view = recordClick(view, pointIndex, view.pendingLabel, summary.iteration);
    await loadSession(sessionId);
  } catch (err) {
    showBanner(err instanceof ApiError ? `click rejected: ${err.message}` : String(err));
  } finally {
    view = { ...view, requestInFlight: false };
  }
}

async function handleSceneUpload(): Promise<void> {
  const file = el.sceneFile.files?.[0];
  if (!file) return;
  try {
    const bytes = new Uint8Array(await file.arrayBuffer());
    const info = await api.uploadScene(bytes);
    const summary = await api.createSession(info.scene_id, {});
    el.sessionField.value = summary.session_id;
    await loadSession(summary.session_id);
  } catch (err) {
    showBanner(err instanceof ApiError ? `upload failed: ${err.message}` : String(err));
  }
}

canvas.addEventListener("click", (ev) => void handleCanvasClick(ev));
el.sceneFile.addEventListener("change", () => void handleSceneUpload());
el.loadButton.addEventListener("click", () => void loadSession(el.sessionField.value.trim()));
el.modeSelect.addEventListener("change", () => {
  view = { ...view, colorMode: el.modeSelect.value as ColorMode };
  redraw(); // re-color without refetching
});
el.labelInput.addEventListener("input", () => {
  view = { ...view, pendingLabel: el.labelInput.value };
});
el.simulateButton.addEventListener("click", async () => {
  if (!view.sessionId) return;
  try {
    await api.simulate(view.sessionId, "ioncoc", 10);
    await loadSession(view.sessionId);
  } catch (err) {
    showBanner(err instanceof ApiError ? `simulate failed: ${err.message}` : String(err));
  }
});

// camera controls: drag to orbit, wheel to zoom
let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("mousedown", (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
});
window.addEventListener("mouseup", () => (dragging = false));
window.addEventListener("mousemove", (ev) => {
  if (!dragging) return;
  pose = {
    ...pose,
    yaw: pose.yaw + (ev.clientX - lastX) * 0.01,
    pitch: Math.max(0, Math.min(Math.PI, pose.pitch + (ev.clientY - lastY) * 0.01)),
  };
  lastX = ev.clientX;
  lastY = ev.clientY;
  redraw();
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  pose = { ...pose, zoom: pose.zoom * (ev.deltaY > 0 ? 0.9 : 1.1) };
  redraw();
});

showBanner("upload a .hows scene or enter a session id");
