/** Stable label coloring: unknown is reserved gray, other ids cycle a palette. */

const PALETTE = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#edc948", "#76b7b2", "#ff9da7", "#9c755f", "#bab0ac",
  "#86bcb6", "#d37295", "#a0cbe8", "#ffbe7d", "#8cd17d",
];

export const UNKNOWN_COLOR = "#777777";
export const ERROR_COLOR = "#d62728";
export const OK_COLOR = "#bbbbbb";

export function labelColor(labelId: number, unknownId: number): string {
  if (labelId === unknownId) return UNKNOWN_COLOR;
  // skip the unknown slot so novel ids continue the palette seamlessly
  const slot = labelId < unknownId ? labelId : labelId - 1;
  return PALETTE[slot % PALETTE.length];
}
