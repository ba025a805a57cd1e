import { describe, expect, it } from "vitest";

import type { SessionStateDto } from "../src/api.js";
import { UNKNOWN_COLOR, ERROR_COLOR, OK_COLOR } from "../src/colors.js";
import {
  availableColorModes,
  displayedNamesValid,
  initialViewState,
  legendEntries,
  pointColors,
  recordClick,
  validateClick,
} from "../src/state.js";

function stateFixture(overrides: Partial<SessionStateDto> = {}): SessionStateDto {
  return {
    session_id: "s1",
    iteration: 1,
    n: 3,
    stride: 1,
    chunk: 0,
    num_chunks: 1,
    indices: [0, 1, 2],
    positions: [[0, 0, 0], [1, 0, 0], [0, 1, 0]],
    point_labels: [0, 2, 3],
    point_label_names: ["wall", "unknown", "sofa"],
    gt_labels: [0, 1, 3],
    prototype_labels: [0, 2, 3],
    prototype_probs: [[1, 0, 0, 0]],
    correspondence: [0, 1, 2],
    label_space: {
      base_classes: ["wall", "floor"],
      unknown_name: "unknown",
      novel_classes: ["sofa"],
    },
    metrics: null,
    ...overrides,
  };
}

describe("legendEntries", () => {
  it("lists base, unknown, then novel classes with stable colors", () => {
    const entries = legendEntries(stateFixture().label_space);
    expect(entries.map((e) => e.name)).toEqual(["wall", "floor", "unknown", "sofa"]);
    expect(entries.map((e) => e.kind)).toEqual(["base", "base", "unknown", "novel"]);
    expect(entries[2].color).toBe(UNKNOWN_COLOR);
    const colors = entries.map((e) => e.color);
    expect(new Set(colors).size).toBe(colors.length);
  });

  it("grows when a novel class registers", () => {
    const before = legendEntries(stateFixture().label_space);
    const after = legendEntries({
      base_classes: ["wall", "floor"],
      unknown_name: "unknown",
      novel_classes: ["sofa", "plant"],
    });
    expect(after.length).toBe(before.length + 1);
    expect(after[after.length - 1].name).toBe("plant");
  });
});

describe("availableColorModes", () => {
  it("offers gt and error modes only with ground truth", () => {
    expect(availableColorModes(stateFixture())).toContain("error-map");
    const without = stateFixture({ gt_labels: null });
    expect(availableColorModes(without)).toEqual(["prediction", "prototype-id"]);
    expect(availableColorModes(null)).toEqual(["prediction", "prototype-id"]);
  });
});

describe("pointColors", () => {
  it("prediction mode colors from service labels verbatim", () => {
    const state = stateFixture();
    const colors = pointColors(state, "prediction");
    const legend = legendEntries(state.label_space);
    expect(colors[0]).toBe(legend[0].color); // wall
    expect(colors[1]).toBe(UNKNOWN_COLOR);
    expect(colors[2]).toBe(legend[3].color); // sofa
  });

  it("error map marks only mismatches with gt", () => {
    const colors = pointColors(stateFixture(), "error-map");
    expect(colors).toEqual([OK_COLOR, ERROR_COLOR, OK_COLOR]);
  });

  it("error map treats sentinel gt as ok", () => {
    const state = stateFixture({ gt_labels: [-1, -1, -1] });
    expect(pointColors(state, "error-map")).toEqual([OK_COLOR, OK_COLOR, OK_COLOR]);
  });

  it("gt modes refuse to run without ground truth", () => {
    const state = stateFixture({ gt_labels: null });
    expect(() => pointColors(state, "ground-truth")).toThrow();
    expect(() => pointColors(state, "error-map")).toThrow();
  });
});

describe("validateClick", () => {
  it("requires a picked point and a label", () => {
    const view = { ...initialViewState(), state: stateFixture() };
    expect(validateClick(view, null)).toMatch(/no point/);
    expect(validateClick(view, 1)).toMatch(/label/);
    expect(validateClick({ ...view, pendingLabel: "sofa" }, 1)).toBeNull();
  });

  it("rejects clicks while a request is pending", () => {
    const view = {
      ...initialViewState(),
      state: stateFixture(),
      pendingLabel: "sofa",
      requestInFlight: true,
    };
    expect(validateClick(view, 1)).toMatch(/in flight/);
  });

  it("rejects the unknown class", () => {
    const view = {
      ...initialViewState(),
      state: stateFixture(),
      pendingLabel: "unknown",
    };
    expect(validateClick(view, 1)).toMatch(/unknown/);
  });
});

describe("click history", () => {
  it("appends records immutably", () => {
    const view = initialViewState();
    const next = recordClick(view, 7, "sofa", 3);
    expect(view.clickHistory).toHaveLength(0);
    expect(next.clickHistory).toEqual([{ point: 7, labelName: "sofa", iteration: 3 }]);
  });
});

describe("displayedNamesValid", () => {
  it("accepts names present in the label space", () => {
    expect(displayedNamesValid(stateFixture())).toBe(true);
  });

  it("flags names the service never declared", () => {
    const state = stateFixture({ point_label_names: ["wall", "ghost", "sofa"] });
    expect(displayedNamesValid(state)).toBe(false);
  });
});
