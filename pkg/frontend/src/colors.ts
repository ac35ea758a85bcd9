/** Stable module color attribution for transcript chips and graph nodes. */

const PALETTE: Record<string, string> = {
  hibye: "#7cb342",
  parrotqa: "#8e24aa",
  wildtalk: "#fb8c00",
  emotion: "#e53935",
  idle: "#546e7a",
  fillers: "#00acc1",
  promptloop: "#3949ab",
  rawio: "#6d4c41",
  system: "#9e9e9e",
  external: "#9e9e9e",
};

const FALLBACK = "#607d8b";

export function moduleColor(module: string): string {
  const known = PALETTE[module];
  if (known) {
    return known;
  }
  if (!module) {
    return FALLBACK;
  }
  // deterministic hash into a fixed hue wheel for unknown modules
  let h = 0;
  for (let i = 0; i < module.length; i++) {
    h = (h * 31 + module.charCodeAt(i)) >>> 0;
  }
  return `hsl(${h % 360}, 45%, 45%)`;
}
