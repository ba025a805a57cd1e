/**
 * View-model for the annotator: pure derivation from service responses.
 * No label is ever computed here; color modes only re-interpret what the
 * service returned.
 */

import type { LabelSpaceDto, SessionStateDto } from "./api.js";
import { ERROR_COLOR, OK_COLOR, UNKNOWN_COLOR, labelColor } from "./colors.js";

export type ColorMode = "prediction" | "ground-truth" | "prototype-id" | "error-map";

export interface ClickRecord {
  point: number;
  labelName: string;
  iteration: number;
}

export interface LegendEntry {
  id: number;
  name: string;
  color: string;
  kind: "base" | "unknown" | "novel";
}

export interface ViewState {
  sessionId: string | null;
  state: SessionStateDto | null;
  colorMode: ColorMode;
  pendingLabel: string;
  clickHistory: ClickRecord[];
  requestInFlight: boolean;
  banner: string | null;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    state: null,
    colorMode: "prediction",
    pendingLabel: "",
    clickHistory: [],
    requestInFlight: false,
    banner: null,
  };
}

export function availableColorModes(state: SessionStateDto | null): ColorMode[] {
  const modes: ColorMode[] = ["prediction", "prototype-id"];
  if (state && state.gt_labels !== null) {
    modes.push("ground-truth", "error-map");
  }
  return modes;
}

export function legendEntries(space: LabelSpaceDto): LegendEntry[] {
  const unknownId = space.base_classes.length;
  const entries: LegendEntry[] = space.base_classes.map((name, id) => ({
    id,
    name,
    color: labelColor(id, unknownId),
    kind: "base" as const,
  }));
  entries.push({
    id: unknownId,
    name: space.unknown_name,
    color: UNKNOWN_COLOR,
    kind: "unknown",
  });
  space.novel_classes.forEach((name, j) => {
    const id = unknownId + 1 + j;
    entries.push({ id, name, color: labelColor(id, unknownId), kind: "novel" });
  });
  return entries;
}

/** Per-point display colors for the current mode; labels come verbatim
 * from the service payload. */
export function pointColors(state: SessionStateDto, mode: ColorMode): string[] {
  const unknownId = state.label_space.base_classes.length;
  switch (mode) {
    case "prediction":
      return state.point_labels.map((l) => labelColor(l, unknownId));
    case "ground-truth": {
      if (state.gt_labels === null) {
        throw new Error("ground-truth mode needs gt labels");
      }
      return state.gt_labels.map((g) =>
        g < 0 ? OK_COLOR : labelColor(g, unknownId)
      );
    }
    case "prototype-id":
      return state.correspondence.map((p) => labelColor(p, -1));
    case "error-map": {
      if (state.gt_labels === null) {
        throw new Error("error-map mode needs gt labels");
      }
      return state.point_labels.map((l, i) => {
        const g = state.gt_labels![i];
        if (g < 0) return OK_COLOR;
        return l === g ? OK_COLOR : ERROR_COLOR;
      });
    }
  }
}

export function validateClick(view: ViewState, pointIndex: number | null): string | null {
  if (view.requestInFlight) return "annotation already in flight";
  if (pointIndex === null) return "no point under the cursor";
  if (!view.pendingLabel.trim()) return "enter or choose a label first";
  const space = view.state?.label_space;
  if (space && view.pendingLabel === space.unknown_name) {
    return "the unknown class is not clickable";
  }
  return null;
}

export function recordClick(
  view: ViewState,
  point: number,
  labelName: string,
  iteration: number
): ViewState {
  return {
    ...view,
    clickHistory: [...view.clickHistory, { point, labelName, iteration }],
  };
}

/** Displayed names must all exist in the session label space. */
export function displayedNamesValid(state: SessionStateDto): boolean {
  const names = new Set<string>([
    ...state.label_space.base_classes,
    state.label_space.unknown_name,
    ...state.label_space.novel_classes,
  ]);
  return state.point_label_names.every((n) => names.has(n));
}
