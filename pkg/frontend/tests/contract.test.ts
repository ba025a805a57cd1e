/**
 * UI-service round trip against a live backend: create a session, click a
 * point with a new novel label, and check that the rendered view shows the
 * clicked label and the legend gains the class. Runs headlessly: the same
 * view-model and renderer the browser uses, driven over a recording
 * surface instead of a canvas.
 */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { legendEntries, pointColors, displayedNamesValid } from "../src/state.js";
import type { DrawSurface } from "../src/render.js";
import { autoFit, renderPoints, projectPoint } from "../src/render.js";

const PORT = 18473;
const BASE = `http://127.0.0.1:${PORT}`;
const PYTHON = process.env.HOWSEG_PYTHON ?? "python3";

let service: ChildProcess | null = null;
let workDir: string;

class RecordingSurface implements DrawSurface {
  width = 640;
  height = 480;
  ops = new Map<string, string>(); // "x,y" -> last color painted there

  clear(): void {
    this.ops.clear();
  }

  drawPoint(x: number, y: number, _r: number, color: string): void {
    this.ops.set(`${Math.round(x)},${Math.round(y)}`, color);
  }
}

async function waitForHealth(api: SessionApi, attempts = 60): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    try {
      await api.health();
      return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 500));
    }
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "howseg-ui-"));
  execFileSync(PYTHON, [
    "-m", "howseg.cli", "synth",
    "--base", "6", "--novel", "2", "--seed", "2",
    "--out", join(workDir, "scene.hows"),
  ]);
  service = spawn(PYTHON, ["-m", "howseg.cli", "serve", "--port", String(PORT)], {
    stdio: "ignore",
  });
  await waitForHealth(new SessionApi(BASE));
}, 60_000);

afterAll(() => {
  service?.kill();
  rmSync(workDir, { recursive: true, force: true });
});

describe("live service round trip", () => {
  it("click with a new novel label shows up in the rendered view and legend", async () => {
    const api = new SessionApi(BASE);

    const bytes = new Uint8Array(readFileSync(join(workDir, "scene.hows")));
    const info = await api.uploadScene(bytes);
    expect(info.has_gt).toBe(true);

    const summary = await api.createSession(info.scene_id, {
      initial_prototypes: 10,
      seed: 2,
    });
    expect(summary.iteration).toBe(0);

    let state = await api.getState(summary.session_id);
    expect(state.point_labels).toHaveLength(state.n);
    const legendBefore = legendEntries(state.label_space);
    expect(legendBefore.some((e) => e.name === "novelA")).toBe(false);

    // a ground-truth novel point (novel ids sit past the unknown slot = 6)
    const point = state.gt_labels!.findIndex((g) => g === 7);
    expect(point).toBeGreaterThanOrEqual(0);

    const after = await api.annotate(summary.session_id, [
      { point: state.indices[point], label_name: "novelA" },
    ]);
    expect(after.iteration).toBe(1);
    expect(after.label_space.novel_classes).toContain("novelA");

    state = await api.getState(summary.session_id);
    // the clicked point's label equals the click label, straight from the wire
    expect(state.point_label_names[point]).toBe("novelA");
    expect(displayedNamesValid(state)).toBe(true);

    // legend gains the class
    const legend = legendEntries(state.label_space);
    const novelEntry = legend.find((e) => e.name === "novelA");
    expect(novelEntry).toBeDefined();
    expect(novelEntry!.kind).toBe("novel");

    // and the renderer paints the clicked point in that class's color
    const surface = new RecordingSurface();
    const pose = autoFit(state.positions, surface);
    renderPoints(surface, state.positions, pointColors(state, "prediction"), pose);
    const proj = projectPoint(state.positions[point], pose, surface);
    const painted = surface.ops.get(`${Math.round(proj.x)},${Math.round(proj.y)}`);
    expect(painted).toBeDefined();
    // nearby points of the same novel blob share the color, so the exact
    // pixel owner is one of them; it must carry the novel class color
    expect(painted).toBe(novelEntry!.color);
  }, 60_000);

  it("parallel sessions stay independent", async () => {
    const api = new SessionApi(BASE);
    const bytes = new Uint8Array(readFileSync(join(workDir, "scene.hows")));
    const info = await api.uploadScene(bytes);
    const [a, b] = await Promise.all([
      api.createSession(info.scene_id, { initial_prototypes: 10, seed: 2 }),
      api.createSession(info.scene_id, { initial_prototypes: 10, seed: 2 }),
    ]);
    const stateA = await api.getState(a.session_id);
    const point = stateA.gt_labels!.findIndex((g) => g === 8);
    await Promise.all([
      api.annotate(a.session_id, [{ point, label_name: "onlyInA" }]),
      api.annotate(b.session_id, [{ point, label_name: "onlyInB" }]),
    ]);
    const [finalA, finalB] = await Promise.all([
      api.getState(a.session_id),
      api.getState(b.session_id),
    ]);
    expect(finalA.label_space.novel_classes).toEqual(["onlyInA"]);
    expect(finalB.label_space.novel_classes).toEqual(["onlyInB"]);
  }, 60_000);
});
