/**
 * Render-time formatting helpers. Stored values are always displayed
 * verbatim (byte-equal to the API payload); these helpers only add
 * human-readable *labels* next to the exact numbers.
 */

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Approximate size label, e.g. "1.5 GiB" — decoration only, never the value. */
export function sizeLabel(bytes: number): string {
  const units = ["B", "KiB", "MiB", "GiB", "TiB", "PiB"];
  let v = bytes;
  let u = 0;
  while (v >= 1024 && u < units.length - 1) {
    v /= 1024;
    u += 1;
  }
  return `${u === 0 ? v : v.toFixed(1)} ${units[u]}`;
}

/** Octal permission string, e.g. 0o640 -> "640". */
export function modeString(mode: number): string {
  return mode.toString(8).padStart(3, "0");
}

/** Integer percent of limit, or null when no limit applies. */
export function percentOfLimit(used: number, limit: number | null): number | null {
  if (limit === null || limit <= 0) {
    return null;
  }
  return Math.floor((used / limit) * 100);
}
